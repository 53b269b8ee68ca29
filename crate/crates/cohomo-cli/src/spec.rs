//! Parsers for the small spec languages on the command line: rotation
//! numbers, map families, and observables.

use cohomolib::arithmetic::{self, AlphaValue, ContinuedFraction};
use cohomolib::circlemap::{self, CircleLift, FamilySpec, TuneOptions};
use cohomolib::periodic::PeriodicFunction;
use num_bigint::BigInt;
use num_complex::Complex64;

use crate::errors::CliError;

/// `golden`, `sqrt:D`, `pi-3`, `P/Q`, or a decimal string.
pub fn parse_alpha(s: &str, bits: u64) -> Result<AlphaValue, CliError> {
    if s == "golden" {
        return Ok(AlphaValue::golden(bits));
    }
    if s == "pi-3" {
        return Ok(AlphaValue::pi_minus_3(bits));
    }
    if let Some(d) = s.strip_prefix("sqrt:") {
        let d: u32 = d
            .parse()
            .map_err(|_| CliError::config(format!("bad radicand in alpha spec `{s}`")))?;
        return Ok(AlphaValue::sqrt_fract(d, bits));
    }
    AlphaValue::from_decimal_str(s).map_err(|m| CliError::config(format!("alpha spec `{s}`: {m}")))
}

/// An alpha spec expanded to a continued fraction; `quotients:a0,a1,...`
/// constructs the expansion directly.
pub fn parse_target_cf(s: &str, bits: u64, depth: usize) -> Result<ContinuedFraction, CliError> {
    if let Some(list) = s.strip_prefix("quotients:") {
        let qs = parse_bigint_list(list)?;
        return arithmetic::from_partial_quotients(&qs).map_err(CliError::from);
    }
    let alpha = parse_alpha(s, bits)?;
    arithmetic::expand(&alpha, depth).map_err(CliError::from)
}

fn parse_bigint_list(list: &str) -> Result<Vec<BigInt>, CliError> {
    list.split(',')
        .map(|t| {
            t.trim()
                .parse::<BigInt>()
                .map_err(|_| CliError::config(format!("bad partial quotient `{t}`")))
        })
        .collect()
}

fn parse_f64(v: &str, ctx: &str) -> Result<f64, CliError> {
    v.parse()
        .map_err(|_| CliError::config(format!("bad number `{v}` in {ctx}")))
}

#[derive(Debug, Clone)]
pub struct ParsedFamily {
    pub name: String,
    pub a: Option<f64>,
    pub eps: Option<f64>,
    pub modes: Vec<(i64, Complex64)>,
    pub rho: Option<String>,
}

/// `name:key=value,...`. Values may themselves contain commas (the
/// `rho=quotients:...` form); tokens without `=` continue the previous
/// value.
pub fn parse_family(s: &str) -> Result<ParsedFamily, CliError> {
    let (name, rest) = match s.split_once(':') {
        Some((n, r)) => (n, r),
        None => (s, ""),
    };
    let mut pairs: Vec<(String, String)> = Vec::new();
    for tok in rest.split(',') {
        if tok.is_empty() {
            continue;
        }
        match tok.split_once('=') {
            Some((k, v)) => pairs.push((k.trim().to_string(), v.trim().to_string())),
            None => match pairs.last_mut() {
                Some((_, v)) => {
                    v.push(',');
                    v.push_str(tok.trim());
                }
                None => {
                    return Err(CliError::config(format!(
                        "dangling token `{tok}` in family spec `{s}`"
                    )))
                }
            },
        }
    }
    let mut pf = ParsedFamily {
        name: name.to_string(),
        a: None,
        eps: None,
        modes: Vec::new(),
        rho: None,
    };
    for (k, v) in pairs {
        match k.as_str() {
            "a" => pf.a = Some(parse_f64(&v, "family spec")?),
            "eps" => pf.eps = Some(parse_f64(&v, "family spec")?),
            "rho" => pf.rho = Some(v),
            "modes" => pf.modes = parse_modes(&v)?,
            other => {
                return Err(CliError::config(format!(
                    "unknown key `{other}` in family spec `{s}`"
                )))
            }
        }
    }
    Ok(pf)
}

/// `k:re:im` items separated by `;`.
pub fn parse_modes(v: &str) -> Result<Vec<(i64, Complex64)>, CliError> {
    v.split(';')
        .filter(|t| !t.is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').collect();
            if parts.len() != 3 {
                return Err(CliError::config(format!("mode `{item}` must be k:re:im")));
            }
            let k: i64 = parts[0]
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("bad mode index `{}`", parts[0])))?;
            let re = parse_f64(parts[1].trim(), "mode list")?;
            let im = parse_f64(parts[2].trim(), "mode list")?;
            Ok((k, Complex64::new(re, im)))
        })
        .collect()
}

impl ParsedFamily {
    pub fn to_spec(&self, a: f64) -> Result<FamilySpec, CliError> {
        match self.name.as_str() {
            "rotation" => Ok(FamilySpec::Rotation { a }),
            "arnold" => {
                let eps = self
                    .eps
                    .ok_or_else(|| CliError::config("arnold family needs eps="))?;
                Ok(FamilySpec::Arnold { a, eps })
            }
            "spectral" => {
                if self.modes.is_empty() {
                    return Err(CliError::config("spectral family needs modes="));
                }
                Ok(FamilySpec::Spectral {
                    a,
                    modes: self.modes.clone(),
                })
            }
            other => Err(CliError::config(format!("unknown family `{other}`"))),
        }
    }
}

/// A lift ready to use, together with the expansion the run should trust:
/// the target's for tuned maps, the measured one otherwise.
pub struct BuiltMap {
    pub lift: CircleLift,
    pub cf: ContinuedFraction,
    pub family: String,
    pub tuned_a: Option<f64>,
    pub certified_width: Option<f64>,
    pub certified_level: Option<usize>,
}

pub fn build_map(
    family: &str,
    depth: usize,
    bits: u64,
    tune_tol: f64,
    tune_budget: u64,
) -> Result<BuiltMap, CliError> {
    let pf = parse_family(family)?;
    match &pf.rho {
        Some(rho) => {
            let target = parse_target_cf(rho, bits, depth)?;
            let spec = pf.to_spec(pf.a.unwrap_or(0.0))?;
            let rep = circlemap::tune_to_rotation(
                &spec,
                &target,
                &TuneOptions {
                    tol: tune_tol,
                    q_budget: tune_budget,
                    exhaust_level: None,
                },
            )?;
            Ok(BuiltMap {
                lift: rep.lift,
                cf: target,
                family: family.to_string(),
                tuned_a: Some(rep.a),
                certified_width: Some(rep.certified_width),
                certified_level: Some(rep.certified_level),
            })
        }
        None => {
            let a = pf
                .a
                .ok_or_else(|| CliError::config(format!("family `{family}` needs a= or rho=")))?;
            let spec = pf.to_spec(a)?;
            let lift = circlemap::make_family(&spec, 1024)?;
            let rot = circlemap::rotation_number(&lift, 1e-12, 5_000_000)?;
            Ok(BuiltMap {
                lift,
                cf: rot.cf,
                family: family.to_string(),
                tuned_a: None,
                certified_width: None,
                certified_level: None,
            })
        }
    }
}

/// Observable specs: `cos`, `sin`, `cosk:K`, `sawtooth:K`,
/// `modes:k:re:im;...`, `zero`. The sample grid is sized from the highest
/// mode, never below `min_grid`.
pub fn parse_phi_min_grid(s: &str, min_grid: usize) -> Result<PeriodicFunction, CliError> {
    let (kind, arg) = match s.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (s, None),
    };
    let build = |modes: &[(i64, Complex64)]| -> Result<PeriodicFunction, CliError> {
        let kmax = modes.iter().map(|&(k, _)| k.unsigned_abs()).max().unwrap_or(1);
        let grid = grid_for(kmax as usize).max(min_grid.next_power_of_two());
        PeriodicFunction::from_modes(grid, 64, 0.0, modes).map_err(CliError::from)
    };
    match kind {
        "cos" => build(&[(1, Complex64::new(0.5, 0.0))]),
        "sin" => build(&[(1, Complex64::new(0.0, -0.5))]),
        "cosk" => {
            let k: i64 = required(arg, "cosk needs a mode index, e.g. cosk:3")?;
            build(&[(k, Complex64::new(0.5, 0.0))])
        }
        "sawtooth" => {
            let kmax: i64 = required(arg, "sawtooth needs a mode count, e.g. sawtooth:16")?;
            if kmax < 1 {
                return Err(CliError::config("sawtooth mode count must be >= 1"));
            }
            // Fejer-tapered jump function: C^0 but with slowly decaying modes.
            let modes: Vec<(i64, Complex64)> = (1..=kmax)
                .map(|k| {
                    let taper = 1.0 - k as f64 / (kmax as f64 + 1.0);
                    let c = taper / (2.0 * std::f64::consts::PI * k as f64);
                    (k, Complex64::new(0.0, c))
                })
                .collect();
            build(&modes)
        }
        "modes" => {
            let list = arg.ok_or_else(|| CliError::config("modes needs a k:re:im list"))?;
            let modes = parse_modes(list)?;
            if modes.is_empty() {
                return Err(CliError::config("empty mode list"));
            }
            build(&modes)
        }
        "zero" => Ok(PeriodicFunction::zero(min_grid.next_power_of_two().max(8))),
        other => Err(CliError::config(format!("unknown phi spec `{other}`"))),
    }
}

pub fn parse_phi(s: &str) -> Result<PeriodicFunction, CliError> {
    parse_phi_min_grid(s, 256)
}

fn required<T: std::str::FromStr>(arg: Option<&str>, msg: &str) -> Result<T, CliError> {
    arg.and_then(|a| a.trim().parse().ok())
        .ok_or_else(|| CliError::config(msg))
}

fn grid_for(kmax: usize) -> usize {
    (4 * kmax.max(1)).max(256).next_power_of_two()
}
