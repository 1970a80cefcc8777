//! Text sidecar holding the ground truth of a generated problem.
//!
//! ```text
//! NORGT 1
//! kind bmf                    kind ovpm                  kind bd
//! v <r> <p>                   features <K> <p>           features <n> <h> <w>
//! <r rows of 0/1>             <K rows of p values>       <n*h rows of 0/1>
//!                             priors <K values>          image <H> <W>
//!                             noise <value>
//! ```

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::bd::BinaryFeatures;
use super::ovpm::OvpmGroundTruth;
use super::BinaryMatrix;

pub const GT_MAGIC: &str = "NORGT 1";

#[derive(Clone, Debug, PartialEq)]
pub enum GroundTruth {
    Bmf {
        v: BinaryMatrix,
    },
    Ovpm(OvpmGroundTruth),
    Bd {
        features: BinaryFeatures,
        image_h: usize,
        image_w: usize,
    },
}

fn bits(row: &[bool]) -> String {
    row.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

impl GroundTruth {
    pub fn kind(&self) -> &'static str {
        match self {
            GroundTruth::Bmf { .. } => "bmf",
            GroundTruth::Ovpm(_) => "ovpm",
            GroundTruth::Bd { .. } => "bd",
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{GT_MAGIC}")?;
        writeln!(w, "kind {}", self.kind())?;
        match self {
            GroundTruth::Bmf { v } => {
                writeln!(w, "v {} {}", v.rows(), v.cols())?;
                for i in 0..v.rows() {
                    writeln!(w, "{}", bits(v.row(i)))?;
                }
            }
            GroundTruth::Ovpm(gt) => {
                writeln!(w, "features {} {}", gt.n_features(), gt.n_pixels())?;
                for f in &gt.features {
                    let vals: Vec<String> = f.iter().map(|v| format!("{v:.16e}")).collect();
                    writeln!(w, "{}", vals.join(" "))?;
                }
                let priors: Vec<String> = gt.priors.iter().map(|v| format!("{v:.16e}")).collect();
                writeln!(w, "priors {}", priors.join(" "))?;
                writeln!(w, "noise {:.16e}", gt.noise)?;
            }
            GroundTruth::Bd {
                features,
                image_h,
                image_w,
            } => {
                writeln!(w, "features {} {} {}", features.n, features.h, features.w)?;
                for row in features.data.chunks(features.w.max(1)) {
                    writeln!(w, "{}", bits(row))?;
                }
                writeln!(w, "image {image_h} {image_w}")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_string_repr(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut p = Parser {
            lines: Vec::new(),
            pos: 0,
        };
        for (i, l) in r.lines().enumerate() {
            let l = l?;
            if !l.trim().is_empty() {
                p.lines.push((i + 1, l.trim().to_string()));
            }
        }
        if p.next()?.1 != GT_MAGIC {
            return Err(Error::parse(1, format!("expected `{GT_MAGIC}` header")));
        }
        let kind = p.keyed("kind")?;
        let gt = match kind.as_slice() {
            [k] if k == "bmf" => {
                let dims = p.keyed_usize("v", 2)?;
                let mut v = BinaryMatrix::zeros(dims[0], dims[1]);
                for i in 0..dims[0] {
                    let row = p.bit_row(dims[1])?;
                    for (j, b) in row.into_iter().enumerate() {
                        v.set(i, j, b);
                    }
                }
                GroundTruth::Bmf { v }
            }
            [k] if k == "ovpm" => {
                let dims = p.keyed_usize("features", 2)?;
                let mut features = Vec::with_capacity(dims[0]);
                for _ in 0..dims[0] {
                    let (line, l) = p.next()?;
                    features.push(p.floats(line, l.split_whitespace(), dims[1])?);
                }
                let priors = p.keyed_floats("priors", dims[0])?;
                let noise = p.keyed_floats("noise", 1)?[0];
                let gt = OvpmGroundTruth {
                    features,
                    priors,
                    noise,
                };
                gt.validate()?;
                GroundTruth::Ovpm(gt)
            }
            [k] if k == "bd" => {
                let dims = p.keyed_usize("features", 3)?;
                let mut data = Vec::with_capacity(dims.iter().product());
                for _ in 0..dims[0] * dims[1] {
                    data.extend(p.bit_row(dims[2])?);
                }
                let image = p.keyed_usize("image", 2)?;
                GroundTruth::Bd {
                    features: BinaryFeatures {
                        n: dims[0],
                        h: dims[1],
                        w: dims[2],
                        data,
                    },
                    image_h: image[0],
                    image_w: image[1],
                }
            }
            _ => return Err(Error::parse(2, "unknown ground-truth kind")),
        };
        if p.pos != p.lines.len() {
            return Err(Error::parse(p.lines[p.pos].0, "trailing content"));
        }
        Ok(gt)
    }

    pub fn from_str_repr(s: &str) -> Result<Self> {
        Self::read(s.as_bytes())
    }
}

struct Parser {
    lines: Vec<(usize, String)>,
    pos: usize,
}

impl Parser {
    fn next(&mut self) -> Result<(usize, String)> {
        let l = self
            .lines
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::parse(self.lines.last().map_or(0, |l| l.0), "unexpected end of file"))?;
        self.pos += 1;
        Ok(l)
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<String>> {
        let (line, l) = self.next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(Error::parse(line, format!("expected `{key}`")));
        }
        Ok(it.map(str::to_string).collect())
    }

    fn keyed_usize(&mut self, key: &str, n: usize) -> Result<Vec<usize>> {
        let line = self.lines.get(self.pos).map_or(0, |l| l.0);
        let v = self.keyed(key)?;
        if v.len() != n {
            return Err(Error::parse(line, format!("`{key}` takes {n} values")));
        }
        v.iter()
            .map(|t| t.parse().map_err(|_| Error::parse(line, format!("bad integer `{t}`"))))
            .collect()
    }

    fn keyed_floats(&mut self, key: &str, n: usize) -> Result<Vec<f64>> {
        let line = self.lines.get(self.pos).map_or(0, |l| l.0);
        let v = self.keyed(key)?;
        self.floats(line, v.iter().map(String::as_str), n)
    }

    fn floats<'a>(&self, line: usize, it: impl Iterator<Item = &'a str>, n: usize) -> Result<Vec<f64>> {
        let v: Vec<f64> = it
            .map(|t| t.parse().map_err(|_| Error::parse(line, format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if v.len() != n {
            return Err(Error::parse(line, format!("expected {n} values")));
        }
        Ok(v)
    }

    fn bit_row(&mut self, n: usize) -> Result<Vec<bool>> {
        let (line, l) = self.next()?;
        if l.len() != n {
            return Err(Error::parse(line, format!("expected {n} bits")));
        }
        l.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::parse(line, "bits must be 0 or 1")),
            })
            .collect()
    }
}
