//! Line-oriented text records.
//!
//! All files are whitespace-delimited with `#` starting a comment. Floats
//! use shortest round-trip notation, so write → read reproduces values
//! bit-exactly.
//!
//! - intrinsics: `key value` lines for fx, fy, cx, cy, baseline
//! - calibration: one `name low high` line per channel
//! - detections: `image_id class_id score x0 y0 x1 y1`
//! - regions: one region per line as strictly increasing superpixel ids,
//!   best-ranked region first
//! - instances (per image): `class_id x0 y0 x1 y1 id...`
//! - manifest: `id split depth color superpixels regions detections
//!   instances labels` with `-` for an absent optional path; paths are
//!   relative to the manifest's directory

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{data_lines, parse_f64, parse_u32, parse_usize, write_text};
use crate::error::{Error, Result};
use crate::eval::{ApResult, BoundingBox, Detection, PrPoint};
use crate::geocentric::{Calibration, ChannelRange};
use crate::geom::{CameraIntrinsics, DEFAULT_BASELINE};
use crate::maskforest::GtInstance;

fn no_whitespace(path: &Path, what: &str, token: &str) -> Result<()> {
    if token.is_empty() || token.contains(char::is_whitespace) || token.contains('#') {
        return Err(Error::format(
            path,
            0,
            format!("{what} {token:?} must be non-empty without whitespace or '#'"),
        ));
    }
    Ok(())
}

pub fn write_intrinsics(path: &Path, k: &CameraIntrinsics) -> Result<()> {
    let mut s = String::new();
    for (key, v) in [
        ("fx", k.fx),
        ("fy", k.fy),
        ("cx", k.cx),
        ("cy", k.cy),
        ("baseline", k.baseline),
    ] {
        let _ = writeln!(s, "{key} {v:?}");
    }
    write_text(path, &s)
}

/// Reads camera intrinsics; `baseline` may be omitted and defaults to
/// [`DEFAULT_BASELINE`].
pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let (mut fx, mut fy, mut cx, mut cy) = (None, None, None, None);
    let mut baseline = DEFAULT_BASELINE;
    for (line, text) in data_lines(path)? {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::format(path, line, "expected `key value`"));
        }
        if !seen.insert(tokens[0].to_string()) {
            return Err(Error::format(path, line, format!("duplicate key {:?}", tokens[0])));
        }
        let v = parse_f64(path, line, tokens[1])?;
        match tokens[0] {
            "fx" => fx = Some(v),
            "fy" => fy = Some(v),
            "cx" => cx = Some(v),
            "cy" => cy = Some(v),
            "baseline" => baseline = v,
            other => {
                return Err(Error::format(path, line, format!("unknown key {other:?}")));
            }
        }
    }
    let require = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| Error::format(path, 0, format!("missing key {key:?}")))
    };
    CameraIntrinsics::new(
        require(fx, "fx")?,
        require(fy, "fy")?,
        require(cx, "cx")?,
        require(cy, "cy")?,
        baseline,
    )
}

pub fn write_calibration(path: &Path, cal: &Calibration) -> Result<()> {
    let mut s = String::new();
    for (name, r) in [
        ("disparity", &cal.disparity),
        ("height", &cal.height),
        ("angle", &cal.angle),
    ] {
        let _ = writeln!(s, "{name} {:?} {:?}", r.low, r.high);
    }
    write_text(path, &s)
}

pub fn read_calibration(path: &Path) -> Result<Calibration> {
    let (mut disparity, mut height, mut angle) = (None, None, None);
    for (line, text) in data_lines(path)? {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(Error::format(path, line, "expected `name low high`"));
        }
        let range = ChannelRange::new(
            parse_f64(path, line, tokens[1])?,
            parse_f64(path, line, tokens[2])?,
        )?;
        let slot = match tokens[0] {
            "disparity" => &mut disparity,
            "height" => &mut height,
            "angle" => &mut angle,
            other => {
                return Err(Error::format(path, line, format!("unknown channel {other:?}")));
            }
        };
        if slot.replace(range).is_some() {
            return Err(Error::format(path, line, format!("duplicate channel {:?}", tokens[0])));
        }
    }
    let require = |v: Option<ChannelRange>, name: &str| {
        v.ok_or_else(|| Error::format(path, 0, format!("missing channel {name:?}")))
    };
    Ok(Calibration {
        disparity: require(disparity, "disparity")?,
        height: require(height, "height")?,
        angle: require(angle, "angle")?,
    })
}

pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<()> {
    let mut s = String::new();
    for d in detections {
        no_whitespace(path, "image id", &d.image_id)?;
        let b = &d.bbox;
        let _ = writeln!(
            s,
            "{} {} {:?} {:?} {:?} {:?} {:?}",
            d.image_id, d.class_id, d.score, b.x0, b.y0, b.x1, b.y1
        );
    }
    write_text(path, &s)
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for (line, text) in data_lines(path)? {
        let t: Vec<&str> = text.split_whitespace().collect();
        if t.len() != 7 {
            return Err(Error::format(
                path,
                line,
                "expected `image_id class_id score x0 y0 x1 y1`",
            ));
        }
        let f = |i: usize| parse_f64(path, line, t[i]);
        out.push(Detection {
            image_id: t[0].to_string(),
            class_id: parse_u32(path, line, t[1])?,
            score: f(2)?,
            bbox: BoundingBox::new(f(3)?, f(4)?, f(5)?, f(6)?)?,
        });
    }
    Ok(out)
}

fn check_region(path: &Path, line: usize, ids: &[u32]) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::format(path, line, "empty region"));
    }
    if !ids.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::format(
            path,
            line,
            "region ids must be strictly increasing",
        ));
    }
    Ok(())
}

fn id_row(ids: &[u32]) -> String {
    let mut s = String::new();
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{id}");
    }
    s
}

/// Writes ranked candidate regions, one per line, best rank first.
pub fn write_regions(path: &Path, regions: &[Vec<u32>]) -> Result<()> {
    let mut s = String::new();
    for (i, ids) in regions.iter().enumerate() {
        check_region(path, i + 1, ids)?;
        s.push_str(&id_row(ids));
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn read_regions(path: &Path) -> Result<Vec<Vec<u32>>> {
    let mut out = Vec::new();
    for (line, text) in data_lines(path)? {
        let ids = text
            .split_whitespace()
            .map(|t| parse_u32(path, line, t))
            .collect::<Result<Vec<u32>>>()?;
        check_region(path, line, &ids)?;
        out.push(ids);
    }
    Ok(out)
}

/// Writes the instances of one image (all must share an image id, which the
/// per-image file does not repeat).
pub fn write_instances(path: &Path, instances: &[GtInstance]) -> Result<()> {
    if let Some(first) = instances.first() {
        if let Some(odd) = instances.iter().find(|i| i.image_id != first.image_id) {
            return Err(Error::InvalidParam(format!(
                "instance file mixes images {:?} and {:?}",
                first.image_id, odd.image_id
            )));
        }
    }
    let mut s = String::new();
    for (i, inst) in instances.iter().enumerate() {
        check_region(path, i + 1, &inst.region)?;
        let b = &inst.bbox;
        let _ = write!(
            s,
            "{} {:?} {:?} {:?} {:?} ",
            inst.class_id, b.x0, b.y0, b.x1, b.y1
        );
        s.push_str(&id_row(&inst.region));
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn read_instances(path: &Path, image_id: &str) -> Result<Vec<GtInstance>> {
    let mut out = Vec::new();
    for (line, text) in data_lines(path)? {
        let t: Vec<&str> = text.split_whitespace().collect();
        if t.len() < 6 {
            return Err(Error::format(
                path,
                line,
                "expected `class_id x0 y0 x1 y1 id...`",
            ));
        }
        let f = |i: usize| parse_f64(path, line, t[i]);
        let region = t[5..]
            .iter()
            .map(|t| parse_u32(path, line, t))
            .collect::<Result<Vec<u32>>>()?;
        check_region(path, line, &region)?;
        out.push(GtInstance {
            image_id: image_id.to_string(),
            class_id: parse_u32(path, line, t[0])?,
            bbox: BoundingBox::new(f(1)?, f(2)?, f(3)?, f(4)?)?,
            region,
        });
    }
    Ok(out)
}

pub const SPLITS: [&str; 3] = ["train", "val", "test"];

/// One dataset image and its files. Paths are kept as written in the
/// manifest (relative to its directory); resolve with [`Manifest::path`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub split: String,
    pub depth: PathBuf,
    pub color: Option<PathBuf>,
    pub superpixels: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub instances: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    /// Directory the entry paths are relative to.
    pub dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let mut entries = Vec::new();
        let mut ids = BTreeSet::new();
        for (line, text) in data_lines(path)? {
            let t: Vec<&str> = text.split_whitespace().collect();
            if t.len() != 9 {
                return Err(Error::format(
                    path,
                    line,
                    format!("expected 9 columns, got {}", t.len()),
                ));
            }
            if !ids.insert(t[0].to_string()) {
                return Err(Error::format(path, line, format!("duplicate id {:?}", t[0])));
            }
            if t[0] == "-" {
                return Err(Error::format(path, line, "id must not be '-'"));
            }
            if !SPLITS.contains(&t[1]) {
                return Err(Error::format(
                    path,
                    line,
                    format!("split must be one of {SPLITS:?}, got {:?}", t[1]),
                ));
            }
            let opt = |i: usize| -> Option<PathBuf> {
                (t[i] != "-").then(|| PathBuf::from(t[i]))
            };
            let entry = ManifestEntry {
                id: t[0].to_string(),
                split: t[1].to_string(),
                depth: PathBuf::from(t[2]),
                color: opt(3),
                superpixels: opt(4),
                regions: opt(5),
                detections: opt(6),
                instances: opt(7),
                labels: opt(8),
            };
            for rel in entry.paths() {
                let full = dir.join(rel);
                if !full.is_file() {
                    return Err(Error::format(
                        path,
                        line,
                        format!("missing file {}", full.display()),
                    ));
                }
            }
            entries.push(entry);
        }
        Ok(Manifest { dir, entries })
    }

    /// Resolves an entry path against the manifest directory.
    pub fn path(&self, rel: &Path) -> PathBuf {
        self.dir.join(rel)
    }

    /// Entries of one split, in manifest order.
    pub fn split(&self, tag: &str) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == tag).collect()
    }
}

impl ManifestEntry {
    /// All paths present on this entry, `depth` first.
    pub fn paths(&self) -> Vec<&Path> {
        let mut out = vec![self.depth.as_path()];
        for p in [
            &self.color,
            &self.superpixels,
            &self.regions,
            &self.detections,
            &self.instances,
            &self.labels,
        ]
        .into_iter()
        .flatten()
        {
            out.push(p.as_path());
        }
        out
    }
}

fn path_column(path: &Path, p: Option<&PathBuf>) -> Result<String> {
    match p {
        None => Ok("-".to_string()),
        Some(p) => {
            let s = p.to_str().ok_or_else(|| {
                Error::format(path, 0, format!("non-UTF-8 path {}", p.display()))
            })?;
            no_whitespace(path, "path", s)?;
            Ok(s.to_string())
        }
    }
}

/// Writes manifest rows verbatim; entry paths must already be relative to
/// the manifest's directory. Does not check that the files exist (writers
/// typically emit the manifest before the data).
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut s = String::from("# id split depth color superpixels regions detections instances labels\n");
    for e in entries {
        no_whitespace(path, "id", &e.id)?;
        if e.id == "-" {
            return Err(Error::format(path, 0, "id must not be '-'"));
        }
        if !SPLITS.contains(&e.split.as_str()) {
            return Err(Error::format(
                path,
                0,
                format!("split must be one of {SPLITS:?}, got {:?}", e.split),
            ));
        }
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {}",
            e.id,
            e.split,
            path_column(path, Some(&e.depth))?,
            path_column(path, e.color.as_ref())?,
            path_column(path, e.superpixels.as_ref())?,
            path_column(path, e.regions.as_ref())?,
            path_column(path, e.detections.as_ref())?,
            path_column(path, e.instances.as_ref())?,
            path_column(path, e.labels.as_ref())?,
        );
    }
    write_text(path, &s)
}

/// Writes `k coverage` pairs, one per line.
pub fn write_coverage_curve(path: &Path, curve: &[(usize, f64)]) -> Result<()> {
    let mut s = String::from("# k coverage\n");
    for (k, c) in curve {
        let _ = writeln!(s, "{k} {c:?}");
    }
    write_text(path, &s)
}

pub fn read_coverage_curve(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for (line, text) in data_lines(path)? {
        let t: Vec<&str> = text.split_whitespace().collect();
        if t.len() != 2 {
            return Err(Error::format(path, line, "expected `k coverage`"));
        }
        out.push((parse_usize(path, line, t[0])?, parse_f64(path, line, t[1])?));
    }
    Ok(out)
}

/// Precision/recall sweep with its summary numbers.
pub fn write_pr_curve(path: &Path, result: &ApResult) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "ap {:?}", result.ap);
    let _ = writeln!(s, "threshold {:?}", result.threshold);
    let _ = writeln!(s, "matched {} {}", result.true_positives, result.ground_truths);
    for p in &result.points {
        let _ = writeln!(s, "point {:?} {:?}", p.recall, p.precision);
    }
    write_text(path, &s)
}

pub fn read_pr_curve(path: &Path) -> Result<ApResult> {
    let (mut ap, mut threshold, mut matched) = (None, None, None);
    let mut points = Vec::new();
    for (line, text) in data_lines(path)? {
        let t: Vec<&str> = text.split_whitespace().collect();
        match (t[0], t.len()) {
            ("ap", 2) => ap = Some(parse_f64(path, line, t[1])?),
            ("threshold", 2) => threshold = Some(parse_f64(path, line, t[1])?),
            ("matched", 3) => {
                matched = Some((
                    parse_usize(path, line, t[1])?,
                    parse_usize(path, line, t[2])?,
                ))
            }
            ("point", 3) => points.push(PrPoint {
                recall: parse_f64(path, line, t[1])?,
                precision: parse_f64(path, line, t[2])?,
            }),
            _ => return Err(Error::format(path, line, format!("bad record {:?}", t[0]))),
        }
    }
    let (true_positives, ground_truths) = matched
        .ok_or_else(|| Error::format(path, 0, "missing `matched` record"))?;
    Ok(ApResult {
        ap: ap.ok_or_else(|| Error::format(path, 0, "missing `ap` record"))?,
        threshold: threshold
            .ok_or_else(|| Error::format(path, 0, "missing `threshold` record"))?,
        true_positives,
        ground_truths,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn intrinsics_round_trip_and_default_baseline() {
        let d = dir();
        let p = d.path().join("k.txt");
        let k = CameraIntrinsics::new(582.62, 582.69, 313.04, 238.44, 0.075).unwrap();
        write_intrinsics(&p, &k).unwrap();
        let back = read_intrinsics(&p).unwrap();
        assert_eq!(
            [back.fx, back.fy, back.cx, back.cy, back.baseline],
            [k.fx, k.fy, k.cx, k.cy, k.baseline]
        );

        std::fs::write(&p, "fx 500 # comment\nfy 500\ncx 320\ncy 240\n").unwrap();
        assert_eq!(read_intrinsics(&p).unwrap().baseline, DEFAULT_BASELINE);

        std::fs::write(&p, "fx 500\nfy 500\ncx 320\n").unwrap();
        assert!(read_intrinsics(&p).is_err());
        std::fs::write(&p, "fx 500\nfx 501\nfy 500\ncx 320\ncy 240\n").unwrap();
        assert!(read_intrinsics(&p).is_err());
    }

    #[test]
    fn calibration_round_trips_bit_exactly() {
        let d = dir();
        let p = d.path().join("cal.txt");
        let cal = Calibration {
            disparity: ChannelRange::new(0.1 + 0.2, 57.3).unwrap(),
            height: ChannelRange::new(-0.41, 2.7182818284590455).unwrap(),
            angle: ChannelRange::new(3.0, 177.0).unwrap(),
        };
        write_calibration(&p, &cal).unwrap();
        let back = read_calibration(&p).unwrap();
        for (a, b) in [
            (back.disparity, cal.disparity),
            (back.height, cal.height),
            (back.angle, cal.angle),
        ] {
            assert_eq!(a.low.to_bits(), b.low.to_bits());
            assert_eq!(a.high.to_bits(), b.high.to_bits());
        }

        std::fs::write(&p, "disparity 0 1\nheight 0 1\n").unwrap();
        assert!(read_calibration(&p).is_err());
    }

    #[test]
    fn detections_round_trip() {
        let d = dir();
        let p = d.path().join("det.txt");
        let dets = vec![
            Detection {
                image_id: "img-07".into(),
                class_id: 3,
                score: 1.0 / 3.0,
                bbox: BoundingBox::new(0.5, 1.25, 10.125, 20.0).unwrap(),
            },
            Detection {
                image_id: "img-07".into(),
                class_id: 0,
                score: 1e-12,
                bbox: BoundingBox::new(-1.5, -2.0, 3.0, 4.0).unwrap(),
            },
        ];
        write_detections(&p, &dets).unwrap();
        let back = read_detections(&p).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().zip(&dets) {
            assert_eq!(a.image_id, b.image_id);
            assert_eq!(a.class_id, b.class_id);
            assert_eq!(a.score.to_bits(), b.score.to_bits());
            assert_eq!(a.bbox.sort_key(), b.bbox.sort_key());
        }
    }

    #[test]
    fn regions_require_strictly_increasing_ids() {
        let d = dir();
        let p = d.path().join("regions.txt");
        let regions = vec![vec![0, 3, 7], vec![2], vec![1, 2, 3, 4]];
        write_regions(&p, &regions).unwrap();
        assert_eq!(read_regions(&p).unwrap(), regions);

        std::fs::write(&p, "3 1 2\n").unwrap();
        assert!(read_regions(&p).is_err());
        std::fs::write(&p, "1 1\n").unwrap();
        assert!(read_regions(&p).is_err());
        assert!(write_regions(&p, &[vec![]]).is_err());
    }

    #[test]
    fn instances_round_trip_per_image() {
        let d = dir();
        let p = d.path().join("inst.txt");
        let inst = vec![
            GtInstance {
                image_id: "a".into(),
                class_id: 2,
                bbox: BoundingBox::new(0.0, 0.0, 30.5, 40.0).unwrap(),
                region: vec![1, 5, 6],
            },
            GtInstance {
                image_id: "a".into(),
                class_id: 9,
                bbox: BoundingBox::new(10.0, 10.0, 20.0, 20.0).unwrap(),
                region: vec![0],
            },
        ];
        write_instances(&p, &inst).unwrap();
        let back = read_instances(&p, "a").unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().zip(&inst) {
            assert_eq!(a.image_id, "a");
            assert_eq!(a.class_id, b.class_id);
            assert_eq!(a.bbox.sort_key(), b.bbox.sort_key());
            assert_eq!(a.region, b.region);
        }

        let mixed = vec![
            inst[0].clone(),
            GtInstance {
                image_id: "b".into(),
                ..inst[1].clone()
            },
        ];
        assert!(write_instances(&p, &mixed).is_err());
    }

    #[test]
    fn manifest_checks_files_splits_and_ids() {
        let d = dir();
        let root = d.path();
        std::fs::create_dir(root.join("data")).unwrap();
        for name in ["a.png", "b.png", "a_sp.png"] {
            std::fs::write(root.join("data").join(name), b"x").unwrap();
        }
        let mpath = root.join("manifest.txt");
        let entries = vec![
            ManifestEntry {
                id: "a".into(),
                split: "train".into(),
                depth: "data/a.png".into(),
                color: None,
                superpixels: Some("data/a_sp.png".into()),
                regions: None,
                detections: None,
                instances: None,
                labels: None,
            },
            ManifestEntry {
                id: "b".into(),
                split: "test".into(),
                depth: "data/b.png".into(),
                color: None,
                superpixels: None,
                regions: None,
                detections: None,
                instances: None,
                labels: None,
            },
        ];
        write_manifest(&mpath, &entries).unwrap();
        let m = Manifest::load(&mpath).unwrap();
        assert_eq!(m.entries, entries);
        assert_eq!(m.split("train").len(), 1);
        assert_eq!(m.split("val").len(), 0);
        assert_eq!(m.path(&m.entries[0].depth), root.join("data/a.png"));

        std::fs::write(&mpath, "a train data/missing.png - - - - - -\n").unwrap();
        assert!(Manifest::load(&mpath).is_err());
        std::fs::write(
            &mpath,
            "a train data/a.png - - - - - -\na val data/b.png - - - - - -\n",
        )
        .unwrap();
        assert!(Manifest::load(&mpath).is_err(), "duplicate id");
        std::fs::write(&mpath, "a dev data/a.png - - - - - -\n").unwrap();
        assert!(Manifest::load(&mpath).is_err(), "unknown split");
        std::fs::write(&mpath, "a train data/a.png - - - - -\n").unwrap();
        assert!(Manifest::load(&mpath).is_err(), "column count");
    }

    #[test]
    fn curves_round_trip() {
        let d = dir();
        let p = d.path().join("cov.txt");
        let curve = vec![(1, 0.25), (5, 0.7500000000000001), (100, 1.0)];
        write_coverage_curve(&p, &curve).unwrap();
        let back = read_coverage_curve(&p).unwrap();
        assert_eq!(back.len(), curve.len());
        for (a, b) in back.iter().zip(&curve) {
            assert_eq!(a.0, b.0);
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }

        let q = d.path().join("pr.txt");
        let result = ApResult {
            ap: 2.0 / 3.0,
            points: vec![
                PrPoint { recall: 0.5, precision: 1.0 },
                PrPoint { recall: 0.5, precision: 0.5 },
                PrPoint { recall: 1.0, precision: 2.0 / 3.0 },
            ],
            threshold: 0.5,
            true_positives: 2,
            ground_truths: 2,
        };
        write_pr_curve(&q, &result).unwrap();
        let back = read_pr_curve(&q).unwrap();
        assert_eq!(back.ap.to_bits(), result.ap.to_bits());
        assert_eq!(back.threshold.to_bits(), result.threshold.to_bits());
        assert_eq!(back.true_positives, 2);
        assert_eq!(back.ground_truths, 2);
        assert_eq!(back.points.len(), 3);
        for (a, b) in back.points.iter().zip(&result.points) {
            assert_eq!(a.recall.to_bits(), b.recall.to_bits());
            assert_eq!(a.precision.to_bits(), b.precision.to_bits());
        }
    }
}
