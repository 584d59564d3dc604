//! Text forms for moduli, spaces, maps and numbers.
//!
//! ```text
//! modulus  hilbert | power:C,S | lp:P | table:const_half | table:E=V;E=V;...
//! space    lP:D with P a number or `inf`, e.g. l2:8, l1.5:3, linf:4
//! map      identity
//!          rotation:angle=A[;A...]
//!          translate:target=X;Y;...,step=S
//!          project:center=X;Y;...,radius=R
//!          compose:M|M|...          (applied left to right)
//!          mix:W*M|W*M|...          (convex combination)
//! number   a float, or pi with an optional factor and divisor: 2pi, pi/2, -3*pi/4
//! ```

use cesaro_core::moduli::ModulusSpec;
use cesaro_core::spaces::{LpSpace, MapKind};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrammarError {
    #[error("bad number `{0}`")]
    Number(String),
    #[error("bad modulus `{0}`: {1}")]
    Modulus(String, String),
    #[error("bad space `{0}`, expected lP:D such as l2:8")]
    Space(String),
    #[error("bad map `{0}`: {1}")]
    Map(String, String),
    #[error("bad vector `{0}`")]
    Vector(String),
}

pub fn parse_number(s: &str) -> Result<f64, GrammarError> {
    let t = s.trim();
    let bad = || GrammarError::Number(s.to_string());
    let Some(at) = t.find("pi") else {
        return t.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad);
    };
    let (head, tail) = (&t[..at], &t[at + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let factor = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let divisor = match tail {
        "" => 1.0,
        d => d.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
    };
    let x = factor * core::f64::consts::PI / divisor;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad())
    }
}

/// Components separated by `sep`.
pub fn parse_vector(s: &str, sep: char) -> Result<Vec<f64>, GrammarError> {
    s.split(sep)
        .map(|c| parse_number(c).map_err(|_| GrammarError::Vector(s.to_string())))
        .collect()
}

pub fn parse_modulus(s: &str) -> Result<ModulusSpec, GrammarError> {
    let t = s.trim();
    let err = |m: String| GrammarError::Modulus(s.to_string(), m);
    let (head, body) = t.split_once(':').unwrap_or((t, ""));
    match head {
        "hilbert" if body.is_empty() => Ok(ModulusSpec::Hilbert),
        "power" => {
            let v = parse_vector(body, ',').map_err(|e| err(e.to_string()))?;
            let [c, e] = v[..] else { return Err(err("expected power:C,S".into())) };
            ModulusSpec::power(c, e).map_err(|e| err(e.to_string()))
        }
        "lp" => ModulusSpec::lp_preset(parse_number(body).map_err(|e| err(e.to_string()))?).map_err(|e| err(e.to_string())),
        "table" if body == "const_half" => Ok(ModulusSpec::constant_half()),
        "table" => {
            let knots = body
                .split(';')
                .map(|kv| {
                    let (e, v) = kv.split_once('=').ok_or_else(|| err(format!("knot `{kv}` is not E=V")))?;
                    Ok((parse_number(e)?, parse_number(v)?))
                })
                .collect::<Result<Vec<_>, GrammarError>>()
                .map_err(|e| match e {
                    GrammarError::Modulus(..) => e,
                    other => err(other.to_string()),
                })?;
            ModulusSpec::table(knots).map_err(|e| err(e.to_string()))
        }
        _ => Err(err("unknown form".into())),
    }
}

pub fn parse_space(s: &str) -> Result<LpSpace, GrammarError> {
    let bad = || GrammarError::Space(s.to_string());
    let (p, d) = s.trim().strip_prefix('l').and_then(|r| r.split_once(':')).ok_or_else(bad)?;
    let p = if p == "inf" { f64::INFINITY } else { p.parse::<f64>().map_err(|_| bad())? };
    let d = d.parse::<usize>().map_err(|_| bad())?;
    LpSpace::new(d, p).map_err(|_| bad())
}

fn fields(body: &str) -> Result<Vec<(&str, &str)>, String> {
    body.split(',')
        .filter(|f| !f.is_empty())
        .map(|f| f.split_once('=').ok_or_else(|| format!("field `{f}` is not KEY=VALUE")))
        .collect()
}

fn field<'a>(fs: &[(&str, &'a str)], key: &str) -> Result<&'a str, String> {
    fs.iter().find(|f| f.0 == key).map(|f| f.1).ok_or_else(|| format!("missing `{key}`"))
}

pub fn parse_map(s: &str) -> Result<MapKind, GrammarError> {
    let t = s.trim();
    let err = |m: String| GrammarError::Map(s.to_string(), m);
    let (head, body) = t.split_once(':').unwrap_or((t, ""));
    let num = |v: &str| parse_number(v).map_err(|e| err(e.to_string()));
    let vec = |v: &str| parse_vector(v, ';').map_err(|e| err(e.to_string()));
    match head {
        "identity" => Ok(MapKind::Identity),
        "rotation" => {
            let fs = fields(body).map_err(err)?;
            Ok(MapKind::Rotation { angles: vec(field(&fs, "angle").map_err(err)?)? })
        }
        "translate" => {
            let fs = fields(body).map_err(err)?;
            let target = vec(field(&fs, "target").map_err(err)?)?;
            let step = num(field(&fs, "step").map_err(err)?)?;
            Ok(MapKind::TranslationToward { target, step })
        }
        "project" => {
            let fs = fields(body).map_err(err)?;
            let center = vec(field(&fs, "center").map_err(err)?)?;
            let radius = num(field(&fs, "radius").map_err(err)?)?;
            Ok(MapKind::Projection { center, radius })
        }
        "compose" => Ok(MapKind::Compose(body.split('|').map(parse_map).collect::<Result<_, _>>()?)),
        "mix" => {
            let mut weights = Vec::new();
            let mut maps = Vec::new();
            for part in body.split('|') {
                let (w, m) = part.split_once('*').ok_or_else(|| err(format!("term `{part}` is not W*MAP")))?;
                weights.push(num(w)?);
                maps.push(parse_map(m)?);
            }
            Ok(MapKind::ConvexCombination { weights, maps })
        }
        _ => Err(err("unknown form".into())),
    }
}
