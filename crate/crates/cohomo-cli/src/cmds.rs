//! One runner per subcommand. Each returns the JSON payload, the verdict
//! list, and (where the data is tabular) a CSV table.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::{json, Value};

use cohomolib::action::{flatness_test, renorm_matrix, renormalize, FiberedAction};
use cohomolib::arithmetic::{self, AlphaValue, ContinuedFraction};
use cohomolib::calculus;
use cohomolib::circlemap::{check_partition, renorm_geometry, RenormOptions};
use cohomolib::coboundary::{
    approximate_by_coboundary, attempt_level, verify_coboundary_certificate,
    ApproximationOptions, CertificateOptions, CertificateReport, LevelAttempt,
};
use cohomolib::cocycle::{
    birkhoff_sum, denjoy_koksma_check, herman_sequence, invariant_average, DkLevelReport,
    DkOptions,
};
use cohomolib::fourier::solve_rotation;

use crate::config::*;
use crate::emit::{check, fnum, Check, CsvTable};
use crate::errors::CliError;
use crate::spec::{build_map, parse_alpha, parse_phi, parse_phi_min_grid, parse_target_cf};

pub struct CommandOutput {
    pub result: Value,
    pub checks: Vec<Check>,
    pub csv: Option<CsvTable>,
}

fn levels_within(cf: &ContinuedFraction, budget: u64) -> Vec<usize> {
    (1..=cf.depth())
        .filter(|&n| cf.q_u64(n).is_some_and(|q| q <= budget))
        .collect()
}

pub fn run_cf(cfg: &CfConfig) -> Result<CommandOutput, CliError> {
    let cf = parse_target_cf(&cfg.alpha, cfg.bits, cfg.depth)?;
    let depth = cf.depth();
    let quots: Vec<String> = cf.partial_quotients().iter().map(|x| x.to_string()).collect();
    let ps: Vec<String> = cf.numerators().iter().map(|x| x.to_string()).collect();
    let qs: Vec<String> = cf.denominators().iter().map(|x| x.to_string()).collect();

    // p_{n-1} q_n - p_n q_{n-1} = (-1)^n, exactly, at every level.
    let pn = cf.numerators();
    let qn = cf.denominators();
    let mut det_ok = true;
    for n in 1..pn.len() {
        let d = &pn[n - 1] * &qn[n] - &pn[n] * &qn[n - 1];
        let want = if n % 2 == 0 { 1 } else { -1 };
        if d != BigInt::from(want) {
            det_ok = false;
        }
    }

    let blev = cf.beta_levels();
    let betas: Vec<f64> = (0..=blev).map(|n| cf.beta_f64(n)).collect();
    let sbetas: Vec<f64> = (0..=blev).map(|n| cf.signed_beta_f64(n)).collect();

    let liouville = match &cfg.tau {
        None => Value::Null,
        Some(t) => {
            let tau = AlphaValue::from_decimal_str(t)
                .map_err(|m| CliError::config(format!("tau `{t}`: {m}")))?;
            let tau: BigRational = tau.lo().clone();
            if tau <= BigRational::from(BigInt::from(0)) {
                return Err(CliError::config("tau must be positive"));
            }
            serde_json::to_value(arithmetic::liouville_levels(&cf, &tau))
                .map_err(|e| CliError::Failure(format!("report serialization: {e}")))?
        }
    };

    let mut csv = CsvTable::new(&["n", "a_n", "p_n", "q_n", "beta_n", "signed_beta_n"]);
    for n in 0..=depth {
        let (b, sb) = if n <= blev {
            (fnum(betas[n]), fnum(sbetas[n]))
        } else {
            (String::new(), String::new())
        };
        csv.push(vec![
            n.to_string(),
            quots.get(n).cloned().unwrap_or_default(),
            ps[n].clone(),
            qs[n].clone(),
            b,
            sb,
        ]);
    }

    let checks = vec![check(
        "convergent_determinant",
        if det_ok { 0.0 } else { 1.0 },
        0.0,
        det_ok,
    )];
    let result = json!({
        "alpha_f64": cf.alpha_f64(),
        "depth": depth,
        "is_rational": cf.is_rational(),
        "rational_end": cf.rational_end(),
        "a": quots,
        "p": ps,
        "q": qs,
        "beta": betas,
        "signed_beta": sbetas,
        "liouville": liouville,
    });
    Ok(CommandOutput {
        result,
        checks,
        csv: Some(csv),
    })
}

pub fn run_calculus(cfg: &CalculusConfig) -> Result<CommandOutput, CliError> {
    let r = cfg.print_pr;
    if !(1..=20).contains(&r) {
        return Err(CliError::config("print_pr must be in 1..=20"));
    }
    let pr = calculus::pr_polynomial(r);
    let homogeneous = pr.is_weight_homogeneous();

    let mut csv = CsvTable::new(&["coeff", "powers"]);
    let mut terms = Vec::new();
    for (powers, coeff) in &pr.terms {
        let pstr: Vec<String> = powers.iter().map(|p| p.to_string()).collect();
        csv.push(vec![coeff.to_string(), pstr.join(" ")]);
        terms.push(json!({ "coeff": coeff.to_string(), "powers": powers }));
    }

    let checks = vec![check(
        "weight_homogeneous",
        if homogeneous { 0.0 } else { 1.0 },
        0.0,
        homogeneous,
    )];
    let result = json!({
        "r": r,
        "n_terms": pr.terms.len(),
        "terms": terms,
    });
    Ok(CommandOutput {
        result,
        checks,
        csv: Some(csv),
    })
}

pub fn run_map(cfg: &MapConfig) -> Result<CommandOutput, CliError> {
    let bm = build_map(&cfg.family, cfg.depth, cfg.bits, cfg.tune_tol, cfg.tune_budget)?;
    let geo = renorm_geometry(
        &bm.lift,
        &bm.cf,
        cfg.level,
        &RenormOptions {
            grid: cfg.grid,
            budget: cfg.q_budget,
        },
    )?;
    let part = check_partition(&bm.lift, &bm.cf, cfg.level, geo.x_star, cfg.q_budget)?;

    let mut csv = CsvTable::new(&["x", "m_prev", "m_cur"]);
    let sp = geo.m_prev.samples();
    let sc = geo.m_cur.samples();
    let n = sp.len();
    for i in 0..n {
        csv.push(vec![fnum(i as f64 / n as f64), fnum(sp[i]), fnum(sc[i])]);
    }

    let mut checks = Vec::new();
    checks.push(check(
        "return_signs_alternate",
        if geo.sign_ok { 0.0 } else { 1.0 },
        0.0,
        geo.sign_ok,
    ));
    checks.push(check(
        "partition_disjoint",
        part.worst_overlap,
        1e-10,
        part.disjoint,
    ));
    let close_defect = part.j_decomposition_defect.max(part.k_decomposition_defect);
    checks.push(check(
        "partition_closes",
        close_defect,
        1e-9,
        close_defect <= 1e-9,
    ));
    // The q_{n+1} sampled arcs are one of the two families; the other
    // lives in the gaps, so their total only bounds the circle from below.
    let excess = (part.total_length - 1.0).max(0.0);
    checks.push(check("arcs_fit_circle", excess, 1e-9, excess <= 1e-9));

    let result = json!({
        "family": bm.family,
        "alpha_f64": bm.cf.alpha_f64(),
        "tuned_a": bm.tuned_a,
        "certified_width": bm.certified_width,
        "certified_level": bm.certified_level,
        "level": geo.n,
        "q_prev": geo.q_prev,
        "p_prev": geo.p_prev,
        "q_cur": geo.q_cur,
        "p_cur": geo.p_cur,
        "big_m_prev": geo.big_m_prev,
        "big_m_cur": geo.big_m_cur,
        "x_star": geo.x_star,
        "m_prev_at_star": geo.m_prev_at_star,
        "star_ratio": geo.star_ratio,
        "sign_ok": geo.sign_ok,
        "flat_max": geo.flat_max,
        "partition": {
            "q_next": part.q_next,
            "worst_overlap": part.worst_overlap,
            "disjoint": part.disjoint,
            "total_length": part.total_length,
            "j_decomposition_defect": part.j_decomposition_defect,
            "k_decomposition_defect": part.k_decomposition_defect,
        },
    });
    Ok(CommandOutput {
        result,
        checks,
        csv: Some(csv),
    })
}

fn dk_rows_json(reports: &[DkLevelReport]) -> Vec<Value> {
    reports
        .iter()
        .map(|r| {
            json!({
                "n": r.n,
                "q": r.q,
                "max_dev": r.max_dev,
                "var_bound": r.var_bound,
                "slack_interp": r.slack_interp,
                "slack_mu": r.slack_mu,
                "pass": r.pass,
            })
        })
        .collect()
}

fn dk_csv(reports: &[DkLevelReport]) -> CsvTable {
    let mut csv = CsvTable::new(&["n", "q_n", "sup_dev", "var_bound", "slack"]);
    for r in reports {
        csv.push(vec![
            r.n.to_string(),
            r.q.to_string(),
            fnum(r.max_dev),
            fnum(r.var_bound),
            fnum(r.slack_interp + r.slack_mu),
        ]);
    }
    csv
}

pub fn run_dk(cfg: &DkConfig) -> Result<CommandOutput, CliError> {
    let bm = build_map(&cfg.family, cfg.depth, cfg.bits, cfg.tune_tol, cfg.tune_budget)?;
    let phi = parse_phi(&cfg.phi)?;
    let levels = match &cfg.levels {
        Some(l) => l.clone(),
        None => levels_within(&bm.cf, cfg.level_budget),
    };
    if levels.is_empty() {
        return Err(CliError::config("no levels to test within level_budget"));
    }
    let reports = denjoy_koksma_check(
        &bm.lift,
        &bm.cf,
        &phi,
        &levels,
        &DkOptions {
            grid: cfg.grid,
            level_budget: cfg.level_budget,
            mu_budget: cfg.mu_budget,
        },
    )?;

    let mut checks = Vec::new();
    let mut worst_ratio = 0.0f64;
    for r in &reports {
        checks.push(check(
            format!("dk_bound_n{}", r.n),
            r.max_dev,
            r.var_bound + r.slack_interp + r.slack_mu,
            r.pass,
        ));
        if r.var_bound > 0.0 {
            worst_ratio = worst_ratio.max((r.slack_interp + r.slack_mu) / r.var_bound);
        }
    }
    checks.push(check(
        "slack_ratio",
        worst_ratio,
        cfg.slack_ratio_bound,
        worst_ratio < cfg.slack_ratio_bound,
    ));

    let result = json!({
        "family": bm.family,
        "alpha_f64": bm.cf.alpha_f64(),
        "tuned_a": bm.tuned_a,
        "phi": cfg.phi,
        "var": phi.total_variation(),
        "levels": dk_rows_json(&reports),
    });
    Ok(CommandOutput {
        result,
        checks,
        csv: Some(dk_csv(&reports)),
    })
}

pub fn run_herman(cfg: &HermanConfig) -> Result<CommandOutput, CliError> {
    let bm = build_map(&cfg.family, cfg.depth, cfg.bits, cfg.tune_tol, cfg.tune_budget)?;
    let levels = match &cfg.levels {
        Some(l) => l.clone(),
        None => levels_within(&bm.cf, cfg.budget),
    };
    if levels.is_empty() {
        return Err(CliError::config("no levels to test within budget"));
    }
    let seq = herman_sequence(&bm.lift, &bm.cf, &levels, cfg.grid, cfg.budget)?;

    let mut csv = CsvTable::new(&["n", "q_n", "sup_log_df"]);
    for l in &seq {
        csv.push(vec![l.n.to_string(), l.q.to_string(), fnum(l.sup_log_df)]);
    }

    let mut checks = Vec::new();
    let mut worst_rise = f64::NEG_INFINITY;
    let mut any_pair = false;
    for w in seq.windows(2) {
        if w[0].n >= 3 {
            any_pair = true;
            worst_rise = worst_rise.max(w[1].sup_log_df - w[0].sup_log_df);
        }
    }
    if any_pair {
        checks.push(check(
            "contraction_from_n3",
            worst_rise,
            0.0,
            worst_rise < 0.0,
        ));
    }
    if let Some(deep) = seq.last() {
        if deep.q >= cfg.threshold_q {
            checks.push(check(
                "small_at_deep_level",
                deep.sup_log_df,
                cfg.threshold,
                deep.sup_log_df < cfg.threshold,
            ));
        }
    }

    let rows: Vec<Value> = seq
        .iter()
        .map(|l| json!({ "n": l.n, "q": l.q, "sup_log_df": l.sup_log_df }))
        .collect();
    let result = json!({
        "family": bm.family,
        "alpha_f64": bm.cf.alpha_f64(),
        "tuned_a": bm.tuned_a,
        "levels": rows,
    });
    Ok(CommandOutput {
        result,
        checks,
        csv: Some(csv),
    })
}

pub fn run_deep_sums(cfg: &DeepSumsConfig) -> Result<CommandOutput, CliError> {
    let bm = build_map(&cfg.family, cfg.depth, cfg.bits, cfg.tune_tol, cfg.tune_budget)?;
    let phi = parse_phi(&cfg.phi)?;
    let levels = levels_within(&bm.cf, cfg.level_budget);
    if levels.is_empty() {
        return Err(CliError::config("no levels to test within level_budget"));
    }
    let reports = denjoy_koksma_check(
        &bm.lift,
        &bm.cf,
        &phi,
        &levels,
        &DkOptions {
            grid: cfg.grid,
            level_budget: cfg.level_budget,
            mu_budget: cfg.mu_budget,
        },
    )?;

    // Reference deviation is the level-2 one when present (the shallowest
    // level the decay claim compares against), else the first row.
    let refrow = reports
        .iter()
        .find(|r| r.n == 2)
        .unwrap_or(&reports[0]);
    let (ref_n, ref_dev) = (refrow.n, refrow.max_dev);
    let deep = reports.last().unwrap();
    let ratio = if ref_dev > 0.0 {
        deep.max_dev / ref_dev
    } else {
        f64::INFINITY
    };

    let checks = vec![check(
        "deep_decay_vs_reference",
        ratio,
        cfg.ratio_bound,
        ratio < cfg.ratio_bound,
    )];
    let result = json!({
        "family": bm.family,
        "alpha_f64": bm.cf.alpha_f64(),
        "tuned_a": bm.tuned_a,
        "phi": cfg.phi,
        "reference_n": ref_n,
        "reference_dev": ref_dev,
        "deep_n": deep.n,
        "deep_dev": deep.max_dev,
        "ratio": ratio,
        "levels": dk_rows_json(&reports),
    });
    Ok(CommandOutput {
        result,
        checks,
        csv: Some(dk_csv(&reports)),
    })
}

pub fn run_solve_rotation(cfg: &SolveRotationConfig) -> Result<CommandOutput, CliError> {
    // A quotient list denotes the exact rational it spells out.
    let alpha = if let Some(list) = cfg.alpha.strip_prefix("quotients:") {
        let cf = parse_target_cf(&format!("quotients:{list}"), cfg.bits, 0)?;
        let p = cf.numerators().last().unwrap().clone();
        let q = cf.denominators().last().unwrap().clone();
        AlphaValue::exact(BigRational::new(p, q))
    } else {
        parse_alpha(&cfg.alpha, cfg.bits)?
    };
    let grid = (4 * cfg.modes).max(256).next_power_of_two();
    let psi = parse_phi_min_grid(&cfg.psi, grid)?;
    let sr = solve_rotation(&psi, &alpha, cfg.modes)?;

    let mut csv = CsvTable::new(&["k", "divisor", "input_mag", "output_mag"]);
    for d in &sr.divisors {
        csv.push(vec![
            d.k.to_string(),
            fnum(d.divisor),
            fnum(d.input_mag),
            fnum(d.output_mag),
        ]);
    }

    let checks = vec![check(
        "residual_c0",
        sr.residual_c0,
        cfg.residual_tol,
        sr.residual_c0 < cfg.residual_tol,
    )];
    let result = json!({
        "alpha": cfg.alpha,
        "psi": cfg.psi,
        "modes": cfg.modes,
        "removed_mean": sr.removed_mean,
        "residual_c0": sr.residual_c0,
        "max_input_coeff": sr.max_input_coeff,
        "max_output_coeff": sr.max_output_coeff,
        "growth_flag": sr.growth_flag,
        "active_output_modes": sr.u.active_modes().len(),
        "truncation_bound": psi.eval_truncation_bound(),
    });
    Ok(CommandOutput {
        result,
        checks,
        csv: Some(csv),
    })
}

pub fn run_renorm(cfg: &RenormConfig) -> Result<CommandOutput, CliError> {
    let bm = build_map(&cfg.family, cfg.depth, cfg.bits, cfg.tune_tol, cfg.tune_budget)?;
    let phi = parse_phi(&cfg.phi)?;
    let geo = renorm_geometry(
        &bm.lift,
        &bm.cf,
        cfg.level,
        &RenormOptions {
            grid: cfg.grid,
            budget: cfg.q_budget,
        },
    )?;
    let action = FiberedAction::induced(&bm.lift, &phi);
    let matrix = renorm_matrix(&bm.cf, cfg.level)?;
    let ren = renormalize(&action, &bm.cf, cfg.level, cfg.samples)?;
    let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];

    // The rebased generators must be the return pairs of the direct orbit.
    let mut gmatch = 0.0f64;
    let mut sup10 = 0.0f64;
    let mut sup01 = 0.0f64;
    let mut csv = CsvTable::new(&["x", "f_prev", "s_prev", "f_cur", "s_cur"]);
    for i in 0..cfg.samples {
        let x = i as f64 / cfg.samples as f64;
        let (y1, t1) = ren.g10.apply(x, 0.0);
        let (y2, t2) = ren.g01.apply(x, 0.0);
        gmatch = gmatch.max((y1 - geo.f_prev_at(x)).abs());
        gmatch = gmatch.max((t1 - birkhoff_sum(&bm.lift, &phi, geo.q_prev as i64, x)).abs());
        gmatch = gmatch.max((y2 - geo.f_cur_at(x)).abs());
        gmatch = gmatch.max((t2 - birkhoff_sum(&bm.lift, &phi, geo.q_cur as i64, x)).abs());
        sup10 = sup10.max(t1.abs());
        sup01 = sup01.max(t2.abs());
        csv.push(vec![fnum(x), fnum(y1), fnum(t1), fnum(y2), fnum(t2)]);
    }

    // Raw fibers are nowhere near flat without the correction step; the
    // sups on the two return windows are reported, not gated.
    let y_cur = geo.f_cur_at(geo.x_star);
    let w_fast = (geo.x_star.min(y_cur), geo.x_star.max(y_cur));
    let y_prev = geo.f_prev_at(geo.x_star);
    let w_slow = (geo.x_star.min(y_prev), geo.x_star.max(y_prev));
    let flat = flatness_test(&ren.g10, w_slow, &ren.g01, w_fast, cfg.flat_samples, 0.01);

    let mut checks = Vec::new();
    checks.push(check(
        "matrix_unimodular",
        (det.abs() - 1) as f64,
        0.0,
        det.abs() == 1,
    ));
    checks.push(check(
        "generators_commute",
        ren.commutation_defect,
        1e-9,
        ren.commutation_defect <= 1e-9,
    ));
    checks.push(check(
        "generators_match_direct",
        gmatch,
        cfg.match_tol,
        gmatch <= cfg.match_tol,
    ));

    let result = json!({
        "family": bm.family,
        "alpha_f64": bm.cf.alpha_f64(),
        "tuned_a": bm.tuned_a,
        "level": cfg.level,
        "matrix": matrix,
        "det": det,
        "q_prev": geo.q_prev,
        "q_cur": geo.q_cur,
        "commutation_defect": ren.commutation_defect,
        "fiber_sup_prev": sup10,
        "fiber_sup_cur": sup01,
        "flatness": {
            "sup_slow_window": flat.sup_first,
            "sup_fast_window": flat.sup_second,
            "samples": flat.samples,
        },
        "generator_match_defect": gmatch,
        "x_star": geo.x_star,
    });
    Ok(CommandOutput {
        result,
        checks,
        csv: Some(csv),
    })
}

fn attempt_json(a: &LevelAttempt) -> Value {
    json!({
        "n": a.n,
        "q_prev": a.q_prev,
        "q_cur": a.q_cur,
        "x_star": a.x_star,
        "ell": a.ell,
        "j_vanish_sup": a.j_vanish_sup,
        "periodicity_defect": a.periodicity_defect,
        "pairing_sup": a.pairing_sup,
        "xi_ck": a.xi_ck,
        "phi_bar_min": a.phi_bar_min,
        "zero_witness_ok": a.zero_witness_ok,
    })
}

fn cert_json(c: &CertificateReport) -> Value {
    json!({
        "level": c.level,
        "q_prev": c.q_prev,
        "q_cur": c.q_cur,
        "flat_prev_sup": c.flat_prev_sup,
        "j_vanish_sup": c.j_vanish_sup,
        "flat_cur_sup": c.flat_cur_sup,
        "pairing_sup": c.pairing_sup,
        "avoidance_violations": c.avoidance_violations,
        "az_mismatches": c.az_mismatches,
        "negative_control_hits": c.negative_control_hits,
        "line_solver_residual": c.line_solver_residual,
        "passed": c.passed,
    })
}

pub fn run_coboundary(cfg: &CoboundaryConfig) -> Result<CommandOutput, CliError> {
    if cfg.r < 5 {
        return Err(CliError::config("r must be at least 5"));
    }
    let bm = build_map(&cfg.family, cfg.depth, cfg.bits, cfg.tune_tol, cfg.tune_budget)?;
    let phi = parse_phi(&cfg.phi)?;
    let opts = ApproximationOptions {
        r: cfg.r,
        epsilon: cfg.epsilon,
        n_min: cfg.n_min,
        q_budget: cfg.budget_qn,
        require_qualifying: cfg.require_qualifying,
        support_points: cfg.support_points,
        scan_points: cfg.scan_points,
        mu_budget: cfg.mu_budget,
        geometry_grid: cfg.geometry_grid,
    };
    let cert_opts = CertificateOptions::default();

    let mut checks = Vec::new();
    let mut attempts_json = Vec::new();
    let mut certs_json = Vec::new();
    let mut csv = CsvTable::new(&[
        "n",
        "q_prev",
        "q_cur",
        "j_vanish_sup",
        "periodicity_defect",
        "pairing_sup",
        "xi_ck",
    ]);
    let push_rows = |csv: &mut CsvTable, a: &LevelAttempt| {
        csv.push(vec![
            a.n.to_string(),
            a.q_prev.to_string(),
            a.q_cur.to_string(),
            fnum(a.j_vanish_sup),
            fnum(a.periodicity_defect),
            fnum(a.pairing_sup),
            fnum(a.xi_ck),
        ]);
    };

    let summary = match &cfg.levels {
        Some(list) => {
            if list.is_empty() {
                return Err(CliError::config("levels list is empty"));
            }
            let avg = invariant_average(&bm.lift, &phi, &bm.cf, cfg.mu_budget)?;
            for &n in list {
                let (att, u, xi) = attempt_level(&bm.lift, &phi, avg.value, &bm.cf, n, &opts)?;
                checks.push(check(
                    format!("xi_ck_n{n}"),
                    att.xi_ck,
                    cfg.epsilon,
                    att.xi_ck <= cfg.epsilon,
                ));
                if cfg.verify {
                    let cert = verify_coboundary_certificate(&u, &xi, &cert_opts)?;
                    checks.push(check(
                        format!("certificate_n{n}"),
                        cert.flat_prev_sup.max(cert.flat_cur_sup).max(cert.pairing_sup),
                        cert_opts.flat_tol,
                        cert.passed,
                    ));
                    certs_json.push(cert_json(&cert));
                }
                push_rows(&mut csv, &att);
                attempts_json.push(attempt_json(&att));
            }
            json!({
                "mode": "explicit_levels",
                "mu": avg.value,
                "mu_error": avg.error_bound,
                "k": (cfg.r - 5) / 6,
                "tau": cfg.r as f64 / 2.0,
            })
        }
        None => {
            let (rep, built) = approximate_by_coboundary(&bm.lift, &phi, &bm.cf, &opts)?;
            for a in &rep.attempts {
                push_rows(&mut csv, a);
                attempts_json.push(attempt_json(a));
            }
            let best = rep
                .attempts
                .iter()
                .map(|a| a.xi_ck)
                .fold(f64::INFINITY, f64::min);
            checks.push(check(
                "epsilon_achieved",
                best,
                cfg.epsilon,
                rep.achieved.is_some(),
            ));
            if cfg.verify {
                if let Some((u, xi)) = &built {
                    let cert = verify_coboundary_certificate(u, xi, &cert_opts)?;
                    checks.push(check(
                        format!("certificate_n{}", cert.level),
                        cert.flat_prev_sup.max(cert.flat_cur_sup).max(cert.pairing_sup),
                        cert_opts.flat_tol,
                        cert.passed,
                    ));
                    certs_json.push(cert_json(&cert));
                }
            }
            json!({
                "mode": "pipeline",
                "mu": rep.mu,
                "mu_error": rep.mu_error,
                "k": rep.k,
                "tau": rep.tau,
                "qualification_waived": rep.qualification_waived,
                "qualifying": rep.qualifying,
                "achieved": rep.achieved,
            })
        }
    };

    let result = json!({
        "family": bm.family,
        "alpha_f64": bm.cf.alpha_f64(),
        "tuned_a": bm.tuned_a,
        "phi": cfg.phi,
        "r": cfg.r,
        "epsilon": cfg.epsilon,
        "summary": summary,
        "attempts": attempts_json,
        "certificates": certs_json,
    });
    Ok(CommandOutput {
        result,
        checks,
        csv: Some(csv),
    })
}
