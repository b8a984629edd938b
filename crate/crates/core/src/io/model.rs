//! Versioned text format for trained forests.
//!
//! ```text
//! forest 1
//! channels <n> <name>...
//! padding <value>...            # one per channel
//! trees <n>
//! tree <index> <node-count>
//! leaf <probability>
//! unary <channel> <dx> <dy> <threshold> <left> <right>
//! binary <channel> <dx1> <dy1> <dx2> <dy2> <threshold> <left> <right>
//! ```
//!
//! Node lines follow their `tree` line in node-index order, index 0 being
//! the root. Floats round-trip bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::{data_lines, float_row, parse_f64, parse_i32, parse_usize, write_text};
use crate::error::{Error, Result};
use crate::maskforest::{Forest, SplitQuestion, Tree, TreeNode};

const VERSION: usize = 1;

pub fn write_forest(path: &Path, forest: &Forest) -> Result<()> {
    forest.validate()?;
    for name in &forest.channels {
        if name.is_empty() || name.contains(char::is_whitespace) || name.contains('#') {
            return Err(Error::InvalidParam(format!("bad channel name {name:?}")));
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "forest {VERSION}");
    let _ = writeln!(s, "channels {} {}", forest.channels.len(), forest.channels.join(" "));
    let _ = writeln!(s, "padding {}", float_row(&forest.padding));
    let _ = writeln!(s, "trees {}", forest.trees.len());
    for (i, tree) in forest.trees.iter().enumerate() {
        let _ = writeln!(s, "tree {i} {}", tree.nodes.len());
        for node in &tree.nodes {
            match node {
                TreeNode::Leaf { probability } => {
                    let _ = writeln!(s, "leaf {probability:?}");
                }
                TreeNode::Split {
                    question:
                        SplitQuestion::Unary {
                            channel,
                            offset: (dx, dy),
                            threshold,
                        },
                    left,
                    right,
                } => {
                    let _ = writeln!(s, "unary {channel} {dx} {dy} {threshold:?} {left} {right}");
                }
                TreeNode::Split {
                    question:
                        SplitQuestion::Binary {
                            channel,
                            offset1: (dx1, dy1),
                            offset2: (dx2, dy2),
                            threshold,
                        },
                    left,
                    right,
                } => {
                    let _ = writeln!(
                        s,
                        "binary {channel} {dx1} {dy1} {dx2} {dy2} {threshold:?} {left} {right}"
                    );
                }
            }
        }
    }
    write_text(path, &s)
}

pub fn read_forest(path: &Path) -> Result<Forest> {
    let lines = data_lines(path)?;
    let bad = |line: usize, msg: &str| Error::format(path, line, msg);

    let next = |cursor: &mut usize| -> Option<(usize, &str)> {
        let row = lines.get(*cursor).map(|(n, s)| (*n, s.as_str()));
        *cursor += 1;
        row
    };
    let expect = |cursor: &mut usize, name: &str| -> Result<(usize, Vec<&str>)> {
        let (line, text) = next(cursor)
            .ok_or_else(|| bad(lines.len(), &format!("missing `{name}` record")))?;
        let t: Vec<&str> = text.split_whitespace().collect();
        if t[0] != name {
            return Err(bad(line, &format!("expected `{name}`, got {:?}", t[0])));
        }
        Ok((line, t))
    };
    let mut cursor = 0usize;

    let (line, header) = expect(&mut cursor, "forest")?;
    if header.len() != 2 || parse_usize(path, line, header[1])? != VERSION {
        return Err(bad(line, &format!("unsupported version (this build reads {VERSION})")));
    }

    let (line, t) = expect(&mut cursor, "channels")?;
    if t.len() < 2 {
        return Err(bad(line, "expected `channels <n> <name>...`"));
    }
    let n_channels = parse_usize(path, line, t[1])?;
    if t.len() != 2 + n_channels {
        return Err(bad(line, &format!("expected {n_channels} channel names")));
    }
    let channels: Vec<String> = t[2..].iter().map(|s| s.to_string()).collect();

    let (line, t) = expect(&mut cursor, "padding")?;
    if t.len() != 1 + n_channels {
        return Err(bad(line, &format!("expected {n_channels} padding values")));
    }
    let padding = t[1..]
        .iter()
        .map(|v| parse_f64(path, line, v))
        .collect::<Result<Vec<f64>>>()?;

    let (line, t) = expect(&mut cursor, "trees")?;
    if t.len() != 2 {
        return Err(bad(line, "expected `trees <n>`"));
    }
    let n_trees = parse_usize(path, line, t[1])?;

    let mut trees = Vec::with_capacity(n_trees);
    for i in 0..n_trees {
        let (line, t) = expect(&mut cursor, "tree")?;
        if t.len() != 3 || parse_usize(path, line, t[1])? != i {
            return Err(bad(line, &format!("expected `tree {i} <node-count>`")));
        }
        let n_nodes = parse_usize(path, line, t[2])?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (line, text) = next(&mut cursor)
                .ok_or_else(|| bad(lines.len(), "file ends inside a tree"))?;
            let t: Vec<&str> = text.split_whitespace().collect();
            let node = match (t[0], t.len()) {
                ("leaf", 2) => TreeNode::Leaf {
                    probability: parse_f64(path, line, t[1])?,
                },
                ("unary", 7) => TreeNode::Split {
                    question: SplitQuestion::Unary {
                        channel: parse_usize(path, line, t[1])?,
                        offset: (parse_i32(path, line, t[2])?, parse_i32(path, line, t[3])?),
                        threshold: parse_f64(path, line, t[4])?,
                    },
                    left: parse_usize(path, line, t[5])?,
                    right: parse_usize(path, line, t[6])?,
                },
                ("binary", 9) => TreeNode::Split {
                    question: SplitQuestion::Binary {
                        channel: parse_usize(path, line, t[1])?,
                        offset1: (parse_i32(path, line, t[2])?, parse_i32(path, line, t[3])?),
                        offset2: (parse_i32(path, line, t[4])?, parse_i32(path, line, t[5])?),
                        threshold: parse_f64(path, line, t[6])?,
                    },
                    left: parse_usize(path, line, t[7])?,
                    right: parse_usize(path, line, t[8])?,
                },
                _ => return Err(bad(line, &format!("bad node record {:?}", t[0]))),
            };
            if let TreeNode::Split { question, .. } = &node {
                let channel = match question {
                    SplitQuestion::Unary { channel, .. } => *channel,
                    SplitQuestion::Binary { channel, .. } => *channel,
                };
                if channel >= n_channels {
                    return Err(bad(line, &format!("channel {channel} out of range")));
                }
            }
            nodes.push(node);
        }
        trees.push(Tree { nodes });
    }
    if let Some((line, _)) = next(&mut cursor) {
        return Err(bad(line, "trailing content after last tree"));
    }

    let forest = Forest {
        trees,
        channels,
        padding,
    };
    forest.validate()?;
    Ok(forest)
}
