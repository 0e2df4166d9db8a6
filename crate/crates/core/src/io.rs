//! Text formats: system specs as JSON, endpoint files, exponent lists and CSV numbers.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{KineticPoint, SystemSpec};
use crate::poincare::EnsembleConfig;

/// Seventeen significant digits, so every `f64` reads back bit for bit.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Wire form of a [`SystemSpec`]; `blocks[i-1]` is `B_i` flattened row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub kappa: usize,
    pub beta: f64,
    pub dims: Vec<usize>,
    pub blocks: Vec<Vec<f64>>,
    pub lambda: f64,
}

impl SpecDocument {
    pub fn from_spec(spec: &SystemSpec) -> Self {
        let blocks = spec
            .blocks()
            .iter()
            .map(|b| {
                (0..b.nrows())
                    .flat_map(|r| (0..b.ncols()).map(move |c| b[(r, c)]))
                    .collect()
            })
            .collect();
        Self {
            kappa: spec.kappa(),
            beta: spec.beta(),
            dims: spec.dims().to_vec(),
            blocks,
            lambda: spec.lambda(),
        }
    }

    pub fn into_spec(self) -> Result<SystemSpec> {
        if self.dims.len() != self.kappa + 1 {
            return Err(Error::InvalidSpec(format!(
                "expected {} dims, got {}",
                self.kappa + 1,
                self.dims.len()
            )));
        }
        if self.blocks.len() != self.kappa {
            return Err(Error::InvalidSpec(format!(
                "expected {} blocks, got {}",
                self.kappa,
                self.blocks.len()
            )));
        }
        let mut blocks = Vec::with_capacity(self.kappa);
        for (k, flat) in self.blocks.iter().enumerate() {
            let (rows, cols) = (self.dims[k + 1], self.dims[k]);
            if rows.checked_mul(cols) != Some(flat.len()) {
                return Err(Error::InvalidSpec(format!(
                    "block B_{} has {} entries, expected {rows}x{cols}",
                    k + 1,
                    flat.len()
                )));
            }
            blocks.push(DMatrix::from_row_slice(rows, cols, flat));
        }
        SystemSpec::new(self.kappa, self.beta, self.dims, blocks, self.lambda)
    }
}

pub fn parse_spec(text: &str) -> Result<SystemSpec> {
    let doc: SpecDocument =
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    doc.into_spec()
}

/// Spec JSON with every float written by [`fmt_f64`].
pub fn spec_to_json(spec: &SystemSpec) -> String {
    let doc = SpecDocument::from_spec(spec);
    let list = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",");
    let mut s = String::new();
    let dims = doc
        .dims
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let blocks = doc
        .blocks
        .iter()
        .map(|b| format!("[{}]", list(b)))
        .collect::<Vec<_>>()
        .join(",");
    let _ = write!(
        s,
        "{{\"kappa\":{},\"beta\":{},\"dims\":[{dims}],\"blocks\":[{blocks}],\"lambda\":{}}}",
        doc.kappa,
        fmt_f64(doc.beta),
        fmt_f64(doc.lambda)
    );
    s
}

/// Comma-separated floats; surrounding whitespace is ignored.
pub fn parse_floats(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Parse("empty list".into()));
    }
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("not a number: {tok:?}")))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("non-finite value {tok:?}")));
            }
            Ok(v)
        })
        .collect()
}

/// `--alphas` value: one exponent per layer.
pub fn parse_alphas(text: &str, kappa: usize) -> Result<Vec<f64>> {
    let a = parse_floats(text)?;
    if a.len() != kappa + 1 {
        return Err(Error::Parse(format!(
            "expected {} exponents, got {}",
            kappa + 1,
            a.len()
        )));
    }
    Ok(a)
}

/// Two data lines `x^(κ), …, x^(0), t`: the far endpoint `z_±`, then the target `z_0`.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_endpoints(text: &str, spec: &SystemSpec) -> Result<(KineticPoint, KineticPoint)> {
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    if lines.len() != 2 {
        return Err(Error::Parse(format!(
            "expected 2 endpoint lines, got {}",
            lines.len()
        )));
    }
    let point = |line: &str| -> Result<KineticPoint> {
        let coords = parse_floats(line)?;
        if coords.len() != spec.n() + 1 {
            return Err(Error::Parse(format!(
                "expected {} coordinates, got {}",
                spec.n() + 1,
                coords.len()
            )));
        }
        KineticPoint::from_display(spec, &coords)
    };
    Ok((point(lines[0])?, point(lines[1])?))
}

pub fn parse_ensemble_config(text: &str) -> Result<EnsembleConfig> {
    let cfg: EnsembleConfig = serde_json::from_str(text)?;
    if cfg.p.is_empty() || cfg.p.iter().any(|p| !(p.is_finite() && *p >= 1.0)) {
        return Err(Error::Parse(
            "p must be a non-empty list of exponents >= 1".into(),
        ));
    }
    if !(cfg.lambda.is_finite() && cfg.lambda >= 1.0) {
        return Err(Error::Parse(format!(
            "lambda = {} must be >= 1",
            cfg.lambda
        )));
    }
    if cfg
        .cells
        .iter()
        .chain(&cfg.lattice)
        .any(|&n| n == 0 || n > 4096)
    {
        return Err(Error::Parse("cell counts must be in 1..=4096".into()));
    }
    Ok(cfg)
}

/// One CSV line of floats, LF-terminated.
pub fn csv_row(values: &[f64]) -> String {
    let mut s = values
        .iter()
        .map(|v| fmt_f64(*v))
        .collect::<Vec<_>>()
        .join(",");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trip_is_bit_exact() {
        let b = DMatrix::from_row_slice(1, 2, &[0.1 + 0.2, std::f64::consts::PI]);
        let spec = SystemSpec::new(1, 1.0 / 3.0, vec![2, 1], vec![b], 3.3).unwrap();
        let text = spec_to_json(&spec);
        let back = parse_spec(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn endpoints_with_comments() {
        let spec = SystemSpec::chain(1, 1, 1.0, 1.0).unwrap();
        let (a, b) = parse_endpoints("# x, v, t\n1, 2, 0\n\n0.5,-0.5,-2\n", &spec).unwrap();
        assert_eq!(a.to_display(), vec![1.0, 2.0, 0.0]);
        assert_eq!(b.layer(0)[0], -0.5);
        assert!(parse_endpoints("1,2,3\n", &spec).is_err());
        assert!(parse_endpoints("1,2\n3,4\n", &spec).is_err());
        assert!(parse_endpoints("1,x,3\n3,4,5\n", &spec).is_err());
    }

    #[test]
    fn alphas_and_floats() {
        assert_eq!(parse_alphas("-0.5, -0.25", 1).unwrap(), vec![-0.5, -0.25]);
        assert!(parse_alphas("-0.5", 1).is_err());
        assert!(parse_floats("nan").is_err());
        assert!(parse_floats("").is_err());
    }

    #[test]
    fn shape_errors_are_invalid_spec() {
        let text = r#"{"kappa":1,"beta":1.0,"dims":[1,1],"blocks":[[1.0,2.0]],"lambda":2.0}"#;
        assert!(matches!(parse_spec(text), Err(Error::InvalidSpec(_))));
        assert!(matches!(parse_spec("{"), Err(Error::InvalidSpec(_))));
    }
}
