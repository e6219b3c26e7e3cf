//! Flag value grammars shared by the subcommands.

use std::fmt;
use std::path::PathBuf;

use constancy::{DerivativeOrder, EstimatorSpec, MaskRect, MinkowskiNorm};

/// `--estimator` after parsing; `learned` models are loaded at run time so a
/// missing file is a domain error rather than a usage error.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorArg {
    Fixed(EstimatorSpec),
    Learned(Option<PathBuf>),
}

/// Canonical `--estimator` spelling with every parameter explicit.
impl fmt::Display for EstimatorArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorArg::Fixed(EstimatorSpec::GrayWorld) => f.write_str("gray-world"),
            EstimatorArg::Fixed(EstimatorSpec::WhitePatch) => f.write_str("white-patch"),
            EstimatorArg::Fixed(EstimatorSpec::ShadesOfGray(n)) => write!(f, "shades-of-gray:p={n}"),
            EstimatorArg::Fixed(EstimatorSpec::GrayEdge { order, norm, sigma }) => {
                let order = match order {
                    DerivativeOrder::Zero => 0,
                    DerivativeOrder::One => 1,
                };
                write!(f, "gray-edge:order={order},p={norm},sigma={sigma}")
            }
            EstimatorArg::Fixed(EstimatorSpec::Learned(_)) | EstimatorArg::Learned(None) => {
                f.write_str("learned")
            }
            EstimatorArg::Learned(Some(p)) => write!(f, "learned:{}", p.display()),
        }
    }
}

fn parse_norm(v: &str) -> Result<MinkowskiNorm, String> {
    if v.eq_ignore_ascii_case("inf") {
        return Ok(MinkowskiNorm::Max);
    }
    match v.parse::<f64>() {
        Ok(p) if p > 0.0 && p.is_finite() => Ok(MinkowskiNorm::P(p)),
        _ => Err(format!("p must be a positive number or 'inf', got '{v}'")),
    }
}

fn key_values(params: &str) -> Result<Vec<(&str, &str)>, String> {
    params
        .split(',')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| format!("expected key=value, got '{kv}'"))
        })
        .collect()
}

pub fn parse_estimator(s: &str) -> Result<EstimatorArg, String> {
    let (name, params) = match s.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (s, None),
    };
    let spec = match (name, params) {
        ("gray-world", None) => EstimatorSpec::GrayWorld,
        ("white-patch", None) => EstimatorSpec::WhitePatch,
        ("learned", None) => return Ok(EstimatorArg::Learned(None)),
        ("learned", Some(path)) if !path.is_empty() => {
            return Ok(EstimatorArg::Learned(Some(PathBuf::from(path))))
        }
        ("shades-of-gray", params) => {
            let mut norm = MinkowskiNorm::P(6.0);
            for (k, v) in key_values(params.unwrap_or("p=6"))? {
                match k {
                    "p" => norm = parse_norm(v)?,
                    _ => return Err(format!("shades-of-gray has no parameter '{k}'")),
                }
            }
            EstimatorSpec::ShadesOfGray(norm)
        }
        ("gray-edge", params) => {
            let (mut order, mut norm, mut sigma) = (DerivativeOrder::One, MinkowskiNorm::P(1.0), 1.0);
            for (k, v) in key_values(params.unwrap_or("order=1"))? {
                match k {
                    "order" => {
                        let n: u32 = v.parse().map_err(|_| format!("bad order '{v}'"))?;
                        order = DerivativeOrder::try_from(n).map_err(|e| e.to_string())?;
                    }
                    "p" => norm = parse_norm(v)?,
                    "sigma" => {
                        sigma = v
                            .parse::<f64>()
                            .ok()
                            .filter(|s| *s >= 0.0 && s.is_finite())
                            .ok_or_else(|| format!("sigma must be >= 0, got '{v}'"))?
                    }
                    _ => return Err(format!("gray-edge has no parameter '{k}'")),
                }
            }
            EstimatorSpec::GrayEdge { order, norm, sigma }
        }
        _ => {
            return Err(format!(
                "unknown estimator '{s}' (gray-world|white-patch|shades-of-gray:p=P|gray-edge:order=N,p=P,sigma=S|learned[:path])"
            ))
        }
    };
    Ok(EstimatorArg::Fixed(spec))
}

fn numbers<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got '{s}'"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("'{p}' is not a number"))?;
    }
    Ok(out)
}

/// `e1,e2,e3`. Positivity is checked later so it maps to a domain error.
pub fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    numbers::<3>(s)
}

pub fn parse_mask(s: &str) -> Result<MaskRect, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let v: Vec<usize> = parts
        .iter()
        .map(|p| p.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("mask must be x0,y0,w,h with non-negative integers, got '{s}'"))?;
    match v[..] {
        [x0, y0, w, h] if w > 0 && h > 0 => Ok(MaskRect::new(x0, y0, w, h)),
        [_, _, _, _] => Err("mask width and height must be positive".into()),
        _ => Err(format!("mask must have four fields, got '{s}'")),
    }
}

pub fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got '{s}'")),
    }
}

pub fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("expected a positive integer, got '{s}'")),
    }
}

/// Square working side in pixels; `None` keeps the native crop size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Side(pub Option<usize>);

pub fn parse_side(s: &str) -> Result<Side, String> {
    if s == "native" {
        Ok(Side(None))
    } else {
        positive_usize(s).map(|n| Side(Some(n)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_grammar() {
        assert_eq!(
            parse_estimator("gray-world").unwrap(),
            EstimatorArg::Fixed(EstimatorSpec::GrayWorld)
        );
        assert_eq!(
            parse_estimator("shades-of-gray:p=inf").unwrap(),
            EstimatorArg::Fixed(EstimatorSpec::ShadesOfGray(MinkowskiNorm::Max))
        );
        assert_eq!(
            parse_estimator("shades-of-gray").unwrap(),
            EstimatorArg::Fixed(EstimatorSpec::ShadesOfGray(MinkowskiNorm::P(6.0)))
        );
        assert_eq!(
            parse_estimator("gray-edge:order=0,p=2,sigma=0.5").unwrap(),
            EstimatorArg::Fixed(EstimatorSpec::GrayEdge {
                order: DerivativeOrder::Zero,
                norm: MinkowskiNorm::P(2.0),
                sigma: 0.5
            })
        );
        assert_eq!(
            parse_estimator("learned:m.txt").unwrap(),
            EstimatorArg::Learned(Some(PathBuf::from("m.txt")))
        );
        for bad in [
            "grey-world",
            "gray-world:p=1",
            "shades-of-gray:p=0",
            "shades-of-gray:q=2",
            "gray-edge:order=2",
            "gray-edge:sigma=-1",
            "gray-edge:p",
            "learned:",
        ] {
            assert!(parse_estimator(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "gray-world",
            "white-patch",
            "shades-of-gray:p=6",
            "shades-of-gray:p=inf",
            "gray-edge:order=1,p=1,sigma=1",
            "gray-edge:order=0,p=2.5,sigma=0",
            "learned",
            "learned:model.txt",
        ] {
            let parsed = parse_estimator(s).unwrap();
            assert_eq!(parsed.to_string(), s);
            assert_eq!(parse_estimator(&parsed.to_string()).unwrap(), parsed);
        }
        assert_eq!(
            parse_estimator("gray-edge").unwrap().to_string(),
            "gray-edge:order=1,p=1,sigma=1"
        );
    }

    #[test]
    fn numeric_grammars() {
        assert_eq!(parse_triple("1, 2,3").unwrap(), [1.0, 2.0, 3.0]);
        assert_eq!(parse_triple("-1,0,1").unwrap(), [-1.0, 0.0, 1.0]);
        assert!(parse_triple("1,2").is_err());
        assert_eq!(parse_mask("1,2,3,4").unwrap(), MaskRect::new(1, 2, 3, 4));
        assert!(parse_mask("1,2,0,4").is_err());
        assert!(parse_mask("1,2,3").is_err());
        assert!(positive_f64("0").is_err());
        assert!(positive_usize("0").is_err());
        assert_eq!(parse_side("native").unwrap(), Side(None));
        assert_eq!(parse_side("32").unwrap(), Side(Some(32)));
    }
}
