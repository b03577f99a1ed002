//! Plain-text network notation:
//!
//! ```text
//! INPUT(1x28x28) -> CONV(8,3) -> AL(REL,SIG,...) -> POOL(2) -> FLATTEN -> FC(64: PLS) -> SOFTMAX(10)
//! ```
//!
//! `CONV(m,N[,stride[,padding]])`, `POOL(window[,stride])`. An `AL` or `FC`
//! list with a single code is uniform over all channels/neurons. `FLATTEN`
//! may be omitted before the first `FC`/`SOFTMAX`; it is always printed.

use std::fmt;
use std::str::FromStr;

use super::{LayerSpec, NetworkSpec};
use crate::activations::{ActivationKind, ActivationMap};
use crate::error::{Error, Result};

fn codes(map: &ActivationMap) -> String {
    if map.is_uniform() {
        map.slots()[0].to_string()
    } else {
        map.slots().iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            } => match (stride, padding) {
                (1, 0) => write!(f, "CONV({out_channels},{kernel})"),
                (s, 0) => write!(f, "CONV({out_channels},{kernel},{s})"),
                (s, p) => write!(f, "CONV({out_channels},{kernel},{s},{p})"),
            },
            LayerSpec::Act(map) => write!(f, "AL({})", codes(map)),
            LayerSpec::Pool { window, stride } if window == stride => write!(f, "POOL({window})"),
            LayerSpec::Pool { window, stride } => write!(f, "POOL({window},{stride})"),
            LayerSpec::Flatten => f.write_str("FLATTEN"),
            LayerSpec::Fc { out_neurons, map } => write!(f, "FC({out_neurons}: {})", codes(map)),
            LayerSpec::SoftmaxHead { classes } => write!(f, "SOFTMAX({classes})"),
        }
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [c, h, w] = self.input_shape;
        write!(f, "INPUT({c}x{h}x{w})")?;
        for layer in &self.layers {
            write!(f, " -> {layer}")?;
        }
        Ok(())
    }
}

/// Splits on commas that are not nested inside parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

fn parse_kinds(s: &str, position: usize) -> Result<Vec<ActivationKind>> {
    split_top_level(s)
        .into_iter()
        .map(|code| {
            code.parse::<ActivationKind>().map_err(|e| Error::Parse {
                position,
                message: e.to_string(),
            })
        })
        .collect()
}

fn parse_counts(args: &str, position: usize, min: usize, max: usize) -> Result<Vec<usize>> {
    let vals: Vec<usize> = args
        .split(',')
        .map(|a| {
            a.trim().parse::<usize>().map_err(|_| Error::Parse {
                position,
                message: format!("expected a non-negative integer, got `{}`", a.trim()),
            })
        })
        .collect::<Result<_>>()?;
    if vals.len() < min || vals.len() > max {
        return Err(Error::Parse {
            position,
            message: format!("expected {min}..={max} arguments, got {}", vals.len()),
        });
    }
    Ok(vals)
}

/// `NAME(args)` or bare `NAME`.
fn split_call(seg: &str, position: usize) -> Result<(String, Option<&str>)> {
    match seg.find('(') {
        None => Ok((seg.to_ascii_uppercase(), None)),
        Some(open) => {
            let inner = seg[open + 1..].strip_suffix(')').ok_or_else(|| Error::Parse {
                position,
                message: format!("missing closing parenthesis in `{seg}`"),
            })?;
            Ok((seg[..open].trim().to_ascii_uppercase(), Some(inner)))
        }
    }
}

impl NetworkSpec {
    /// Parses the plain-text notation. Errors carry the 1-based segment position.
    pub fn parse<'a>(text: &'a str) -> Result<NetworkSpec> {
        let segments: Vec<&str> = text.split("->").map(str::trim).collect();
        let (name, args) = split_call(segments[0], 1)?;
        let input = match (name.as_str(), args) {
            ("INPUT", Some(a)) => {
                let dims: Vec<usize> = a
                    .split(['x', 'X'])
                    .map(|d| d.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Parse {
                        position: 1,
                        message: format!("bad input shape `{a}`"),
                    })?;
                <[usize; 3]>::try_from(dims).map_err(|_| Error::Parse {
                    position: 1,
                    message: "input shape must be CxHxW".into(),
                })?
            }
            _ => {
                return Err(Error::Parse {
                    position: 1,
                    message: "spec must start with INPUT(CxHxW)".into(),
                })
            }
        };

        let mut layers: Vec<LayerSpec> = Vec::new();
        let mut channels = input[0];
        let mut flattened = false;
        for (idx, seg) in segments.iter().enumerate().skip(1) {
            let position = idx + 1;
            let (name, args) = split_call(seg, position)?;
            let need = |a: Option<&'a str>| -> Result<&'a str> {
                a.ok_or_else(|| Error::Parse {
                    position,
                    message: format!("{name} needs arguments"),
                })
            };
            let layer = match name.as_str() {
                "CONV" => {
                    let v = parse_counts(need(args)?, position, 2, 4)?;
                    channels = v[0];
                    LayerSpec::Conv {
                        out_channels: v[0],
                        kernel: v[1],
                        stride: v.get(2).copied().unwrap_or(1),
                        padding: v.get(3).copied().unwrap_or(0),
                    }
                }
                "AL" => {
                    let kinds = parse_kinds(need(args)?, position)?;
                    let kinds = if kinds.len() == 1 {
                        vec![kinds[0]; channels]
                    } else {
                        kinds
                    };
                    LayerSpec::Act(ActivationMap::new(kinds)?)
                }
                "POOL" => {
                    let v = parse_counts(need(args)?, position, 1, 2)?;
                    LayerSpec::Pool {
                        window: v[0],
                        stride: v.get(1).copied().unwrap_or(v[0]),
                    }
                }
                "FLATTEN" => {
                    flattened = true;
                    LayerSpec::Flatten
                }
                "FC" | "SOFTMAX" => {
                    if !flattened {
                        layers.push(LayerSpec::Flatten);
                        flattened = true;
                    }
                    if name == "FC" {
                        let a = need(args)?;
                        let (n, kinds) = a.split_once(':').ok_or_else(|| Error::Parse {
                            position,
                            message: "FC needs `neurons: codes`".into(),
                        })?;
                        let n = parse_counts(n, position, 1, 1)?[0];
                        let kinds = parse_kinds(kinds, position)?;
                        let kinds = if kinds.len() == 1 { vec![kinds[0]; n] } else { kinds };
                        LayerSpec::Fc {
                            out_neurons: n,
                            map: ActivationMap::new(kinds)?,
                        }
                    } else {
                        LayerSpec::SoftmaxHead {
                            classes: parse_counts(need(args)?, position, 1, 1)?[0],
                        }
                    }
                }
                other => {
                    return Err(Error::Parse {
                        position,
                        message: format!("unknown layer `{other}`"),
                    })
                }
            };
            layers.push(layer);
        }
        NetworkSpec::new(input, layers, 0)
    }
}

impl FromStr for NetworkSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NetworkSpec::parse(s)
    }
}
