//! CIGRID v1 field files.
//!
//! A single ASCII header line
//!
//! ```text
//! CIGRID v1 n=2 shape=65,65 h=0.015625 bbox=-0.0625,0.9375,-0.0625,0.9375 kind=scalar domain=square
//! ```
//!
//! followed by little-endian `f64` values, point-major (axis 0 slowest) with
//! components innermost. Vector fields carry `n` components, symmetric-matrix
//! fields the `n(n+1)/2` upper-triangle entries in row order.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use super::{sym_len, Domain, Grid, ScalarField, SymMatrixField, VectorField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Scalar,
    Vector,
    SymMat,
}

impl Kind {
    pub fn components(self, n: usize) -> usize {
        match self {
            Kind::Scalar => 1,
            Kind::Vector => n,
            Kind::SymMat => sym_len(n),
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Scalar => "scalar",
            Kind::Vector => "vector",
            Kind::SymMat => "symmat",
        })
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(Kind::Scalar),
            "vector" => Ok(Kind::Vector),
            "symmat" => Ok(Kind::SymMat),
            other => Err(Error::Format(format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub n: usize,
    pub shape: Vec<usize>,
    pub h: f64,
    pub bbox: Vec<(f64, f64)>,
    pub kind: Kind,
    /// Absent in files written by other tools.
    pub domain: Option<Domain>,
}

impl Header {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn for_grid(grid: &Grid, kind: Kind) -> Self {
        Header {
            n: grid.n,
            shape: grid.shape.clone(),
            h: grid.h,
            bbox: grid.bbox(),
            kind,
            domain: Some(grid.domain),
        }
    }

    /// Rebuilds the grid, taking the domain from the header or `fallback`.
    pub fn grid(&self, fallback: Option<Domain>) -> Result<Arc<Grid>> {
        let domain = self
            .domain
            .or(fallback)
            .ok_or_else(|| Error::Format("header has no domain and none was supplied".into()))?;
        let zero = self
            .bbox
            .iter()
            .map(|(lo, _)| {
                let z = -lo / self.h;
                if z < 0.0 || (z - z.round()).abs() > 1e-6 {
                    Err(Error::Format(format!(
                        "bbox lower corner {lo} is not on the lattice"
                    )))
                } else {
                    Ok(z.round() as usize)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Grid::with_layout(domain, self.n, self.h, zero, self.shape.clone())
    }
}

impl fmt::Display for Header {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(",");
        write!(
            f,
            "CIGRID v1 n={} shape={} h={} bbox={} kind={}",
            self.n,
            join(self.shape.iter().map(|d| d.to_string()).collect()),
            self.h,
            join(
                self.bbox
                    .iter()
                    .flat_map(|(lo, hi)| [lo.to_string(), hi.to_string()])
                    .collect()
            ),
            self.kind
        )?;
        if let Some(d) = self.domain {
            let name = match d {
                Domain::Square => "square",
                Domain::Disc => "disc",
            };
            write!(f, " domain={name}")?;
        }
        Ok(())
    }
}

impl FromStr for Header {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("CIGRID") || tokens.next() != Some("v1") {
            return Err(Error::Format("missing `CIGRID v1` magic".into()));
        }
        let (mut n, mut shape, mut h, mut bbox, mut kind, mut domain) =
            (None, None, None, None, None, None);
        for tok in tokens {
            let (key, value) = tok
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header token `{tok}`")))?;
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number `{s}` for `{key}`")))
            };
            match key {
                "n" => {
                    n = Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| Error::Format(format!("bad n `{value}`")))?,
                    )
                }
                "shape" => {
                    shape = Some(
                        value
                            .split(',')
                            .map(|d| {
                                d.parse::<usize>()
                                    .map_err(|_| Error::Format(format!("bad shape `{value}`")))
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "h" => h = Some(num(value)?),
                "bbox" => bbox = Some(value.split(',').map(num).collect::<Result<Vec<_>>>()?),
                "kind" => kind = Some(value.parse::<Kind>()?),
                "domain" => {
                    domain = Some(match value {
                        "square" => Domain::Square,
                        "disc" => Domain::Disc,
                        other => return Err(Error::Format(format!("unknown domain `{other}`"))),
                    })
                }
                _ => {}
            }
        }
        let missing = |k: &str| Error::Format(format!("header lacks `{k}`"));
        let n = n.ok_or_else(|| missing("n"))?;
        let shape = shape.ok_or_else(|| missing("shape"))?;
        let bbox = bbox.ok_or_else(|| missing("bbox"))?;
        if shape.len() != n || bbox.len() != 2 * n {
            return Err(Error::Format("shape/bbox length disagrees with n".into()));
        }
        Ok(Header {
            n,
            shape,
            h: h.ok_or_else(|| missing("h"))?,
            bbox: bbox.chunks(2).map(|c| (c[0], c[1])).collect(),
            kind: kind.ok_or_else(|| missing("kind"))?,
            domain,
        })
    }
}

/// Any field kind, as stored in a CIGRID file.
#[derive(Debug, Clone)]
pub enum FieldData {
    Scalar(ScalarField),
    Vector(VectorField),
    SymMat(SymMatrixField),
}

impl FieldData {
    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            FieldData::Scalar(f) => &f.grid,
            FieldData::Vector(f) => &f.grid,
            FieldData::SymMat(f) => &f.grid,
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            FieldData::Scalar(_) => Kind::Scalar,
            FieldData::Vector(_) => Kind::Vector,
            FieldData::SymMat(_) => Kind::SymMat,
        }
    }

    fn comps(&self) -> Vec<&[f64]> {
        match self {
            FieldData::Scalar(f) => vec![&f.values],
            FieldData::Vector(f) => f.comps.iter().map(|c| c.as_slice()).collect(),
            FieldData::SymMat(f) => f.comps.iter().map(|c| c.as_slice()).collect(),
        }
    }

    pub fn header(&self) -> Header {
        Header::for_grid(self.grid(), self.kind())
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            FieldData::Scalar(f) => Ok(f),
            other => Err(Error::Format(format!(
                "expected a scalar field, found {}",
                other.kind()
            ))),
        }
    }
}

pub fn write_field<W: Write>(mut out: W, field: &FieldData) -> Result<()> {
    writeln!(out, "{}", field.header())?;
    let comps = field.comps();
    let len = field.grid().len();
    let mut buf = Vec::with_capacity(len * comps.len() * 8);
    for p in 0..len {
        for c in &comps {
            buf.extend_from_slice(&c[p].to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

pub fn read_header<R: BufRead>(input: &mut R) -> Result<Header> {
    let mut line = Vec::new();
    input.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("header line not terminated".into()));
    }
    let text = std::str::from_utf8(&line[..line.len() - 1])
        .map_err(|_| Error::Format("header is not UTF-8".into()))?;
    text.parse()
}

pub fn read_field<R: Read>(input: R, fallback: Option<Domain>) -> Result<FieldData> {
    let mut input = BufReader::new(input);
    let header = read_header(&mut input)?;
    let grid = header.grid(fallback)?;
    let ncomp = header.kind.components(header.n);
    let len = header.len();
    let mut raw = Vec::new();
    input.read_to_end(&mut raw)?;
    if raw.len() != len * ncomp * 8 {
        return Err(Error::Format(format!(
            "expected {} bytes of data, found {}",
            len * ncomp * 8,
            raw.len()
        )));
    }
    let mut comps = vec![vec![0.0; len]; ncomp];
    for (m, chunk) in raw.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        comps[m % ncomp][m / ncomp] = v;
    }
    Ok(match header.kind {
        Kind::Scalar => FieldData::Scalar(ScalarField {
            grid,
            values: comps.pop().expect("one component"),
        }),
        Kind::Vector => FieldData::Vector(VectorField { grid, comps }),
        Kind::SymMat => FieldData::SymMat(SymMatrixField { grid, comps }),
    })
}

pub fn save(path: impl AsRef<Path>, field: &FieldData) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_field(std::io::BufWriter::new(file), field)
}

pub fn load(path: impl AsRef<Path>, fallback: Option<Domain>) -> Result<FieldData> {
    read_field(std::fs::File::open(path)?, fallback)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let g = Grid::new(Domain::Disc, 2, 16, 0.25).unwrap();
        let h = Header::for_grid(&g, Kind::SymMat);
        let text = h.to_string();
        assert!(text.starts_with(
            "CIGRID v1 n=2 shape=21,21 h=0.125 bbox=-1.25,1.25,-1.25,1.25 kind=symmat"
        ));
        let back: Header = text.parse().unwrap();
        assert_eq!(back, h);
        assert!(back.grid(None).unwrap().same_layout(&g));
    }

    #[test]
    fn fields_round_trip_bit_exactly() {
        let g = Grid::new(Domain::Square, 3, 6, 0.3).unwrap();
        let v = VectorField::from_fn(&g, |x, out| {
            out[0] = x[0].sin();
            out[1] = 1.0 / 3.0 + x[1];
            out[2] = -x[2] * x[0];
        });
        let mut bytes = Vec::new();
        write_field(&mut bytes, &FieldData::Vector(v.clone())).unwrap();
        match read_field(bytes.as_slice(), None).unwrap() {
            FieldData::Vector(w) => assert_eq!(w.comps, v.comps),
            other => panic!("wrong kind {:?}", other.kind()),
        }
    }

    #[test]
    fn truncated_data_is_rejected() {
        let g = Grid::new(Domain::Square, 2, 4, 0.5).unwrap();
        let f = ScalarField::constant(&g, 1.0);
        let mut bytes = Vec::new();
        write_field(&mut bytes, &FieldData::Scalar(f)).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            read_field(bytes.as_slice(), None),
            Err(Error::Format(_))
        ));
    }
}
