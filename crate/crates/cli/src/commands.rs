use anyhow::{bail, Result};
use serde_json::{json, Value};

use rsmdp::assumptions;
use rsmdp::avg_bellman::{extract_rules, solve_average, AvgError};
use rsmdp::disc_bellman::{
    blackwell_threshold, default_beta_grid, neutral_blackwell, solve_discounted,
    solve_neutral_discounted, vanishing_trace, EvidenceRow,
};
use rsmdp::entropic::{mc_average_criterion, mc_discounted_criterion};
use rsmdp::gamma_sweep::{neutral_neighborhood, regions};
use rsmdp::{DecisionRule, Mdp};

use crate::cli::{Command, Format};
use crate::policy::parse_policy;
use crate::UsageError;

/// Result of one command: the text for standard output and the files to
/// write under `--out`.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub files: Vec<(String, String)>,
    /// Some assumption check failed.
    pub advisory: bool,
}

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values serialize") + "\n"
}

fn labels(mdp: &Mdp, u: &DecisionRule) -> Value {
    json!(mdp.describe_rule(u))
}

fn per_state(mdp: &Mdp, key: &str, values: &[f64]) -> Value {
    Value::Array(
        mdp.states()
            .iter()
            .zip(values)
            .map(|(s, v)| json!({ "state": s, key: v }))
            .collect(),
    )
}

fn anchor_index(mdp: &Mdp, anchor: &Option<String>) -> Result<usize> {
    Ok(match anchor {
        Some(label) => mdp.state_index(label)?,
        None => 0,
    })
}

/// Assembles the output from a JSON document and an optional CSV table.
fn finish(name: &str, doc: Value, table: Option<(&str, String)>, format: Format) -> Output {
    let json_text = pretty(&doc);
    let mut files = vec![(format!("{name}.json"), json_text.clone())];
    let stdout = match (&table, format) {
        (Some((_, csv)), Format::Csv) => csv.clone(),
        _ => json_text,
    };
    if let Some((file, csv)) = table {
        files.push((file.to_string(), csv));
    }
    Output {
        stdout,
        files,
        advisory: false,
    }
}

pub fn execute(cmd: &Command, mdp: &Mdp, format: Format) -> Result<Output> {
    match cmd {
        Command::Check { .. } => check(mdp),
        Command::Solve {
            gamma,
            tol,
            max_iter,
            anchor,
            ..
        } => solve(mdp, *gamma, *tol, *max_iter, anchor, format),
        Command::Sweep {
            from,
            to,
            step,
            tol_root,
            ..
        } => sweep(mdp, *from, *to, *step, *tol_root, format),
        Command::Neutral { .. } => {
            let r = neutral_neighborhood(mdp, 1e-12)?;
            Ok(finish("neutral", serde_json::to_value(r)?, None, format))
        }
        Command::Discount {
            gamma,
            beta,
            tol,
            levels,
            anchor,
            ..
        } => discount(mdp, *gamma, *beta, *tol, *levels, anchor, format),
        Command::Blackwell {
            gamma,
            level,
            betas,
            tol,
            ..
        } => blackwell(mdp, *gamma, *level, betas.clone(), *tol, format),
        Command::Vanish {
            gamma,
            betas,
            n_max,
            anchor,
            tol,
            ..
        } => vanish(mdp, *gamma, betas, *n_max, anchor, *tol, format),
        Command::Simulate {
            policy,
            gamma,
            avg,
            beta,
            n,
            m,
            seed,
            x0,
            trunc_tol,
            ..
        } => {
            let pi = parse_policy(mdp, policy)?;
            let start = anchor_index(mdp, x0)?;
            let (criterion, est) = if *avg {
                let n = n.expect("clap requires --n with --avg");
                ("average", mc_average_criterion(mdp, &pi, *gamma, start, n, *m, *seed)?)
            } else {
                let beta = beta.expect("clap requires --beta without --avg");
                (
                    "discounted",
                    mc_discounted_criterion(mdp, &pi, *gamma, beta, start, *trunc_tol, *m, *seed)?,
                )
            };
            let doc = json!({
                "criterion": criterion,
                "policy": policy,
                "gamma": gamma,
                "beta": beta,
                "start": mdp.states()[start],
                "result": est,
            });
            Ok(finish("simulate", doc, None, format))
        }
        Command::Replay { .. } => bail!("replay is handled by the caller"),
    }
}

fn check(mdp: &Mdp) -> Result<Output> {
    let report = assumptions::check(mdp)?;
    let mut doc = serde_json::to_value(&report)?;
    doc["all_hold"] = json!(report.all_hold());
    let mut out = finish("check", doc, None, Format::Json);
    out.advisory = !report.all_hold();
    Ok(out)
}

fn solve(
    mdp: &Mdp,
    gamma: f64,
    tol: f64,
    max_iter: usize,
    anchor: &Option<String>,
    format: Format,
) -> Result<Output> {
    let z = anchor_index(mdp, anchor)?;
    let sol = match solve_average(mdp, gamma, tol, max_iter, z) {
        Ok(s) => s,
        Err(AvgError::NotConverged { tol, last }) => {
            eprintln!(
                "{}",
                pretty(&json!({
                    "status": "not_converged",
                    "tol": tol,
                    "residual": last.residual,
                    "iterations": last.iterations,
                    "lambda": last.lambda,
                    "observed_ratios": last.observed_ratios,
                }))
            );
            return Err(AvgError::NotConverged { tol, last }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let rules = extract_rules(mdp, gamma, &sol);
    let optimal: Vec<Value> = mdp
        .states()
        .iter()
        .zip(&rules.sets)
        .map(|(s, set)| {
            let acts: Vec<&str> = set.iter().map(|&a| mdp.actions()[a].as_str()).collect();
            json!({ "state": s, "actions": acts })
        })
        .collect();
    let doc = json!({
        "gamma": gamma,
        "lambda": sol.lambda,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "anchor": mdp.states()[z],
        "w": per_state(mdp, "w", &sol.w),
        "optimal_actions": optimal,
        "canonical_rule": labels(mdp, &rules.canonical),
        "rule_id": rules.canonical.index(mdp.l()),
        "observed_ratios": sol.observed_ratios,
    });
    Ok(finish("solve", doc, None, format))
}

fn sweep(mdp: &Mdp, from: f64, to: f64, step: f64, tol_root: f64, format: Format) -> Result<Output> {
    let atlas = regions(mdp, (from, to), step, tol_root)?;
    let mut rows = Vec::new();
    for (i, g) in atlas.grid.iter().enumerate() {
        for c in &atlas.curves {
            let class = atlas.class_of_rule(c.rule_id);
            let optimal = class.is_some_and(|cl| atlas.optimal[i].contains(&cl));
            rows.push(vec![
                float(*g),
                c.rule_id.to_string(),
                opt_float(c.values[i]),
                optimal.to_string(),
            ]);
        }
    }
    let csv = csv_table(&["gamma", "rule_id", "lambda", "optimal"], rows)?;
    let classes: Vec<Value> = atlas
        .classes
        .iter()
        .map(|c| {
            json!({
                "id": c.id,
                "representative": labels(mdp, &c.representative),
                "representative_id": c.representative_id,
                "member_ids": c.member_ids,
            })
        })
        .collect();
    let summary = json!({
        "window": [from, to],
        "step": step,
        "tol_root": tol_root,
        "classes": classes,
        "merges": atlas.merges,
        "regions": atlas.regions,
        "boundaries": atlas.boundaries,
    });
    let mut out = finish("sweep", summary, Some(("sweep.csv", csv)), format);
    out.files.push(("atlas.json".into(), pretty(&serde_json::to_value(&atlas)?)));
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn discount(
    mdp: &Mdp,
    gamma: f64,
    beta: f64,
    tol: f64,
    levels: usize,
    anchor: &Option<String>,
    format: Format,
) -> Result<Output> {
    if gamma == 0.0 {
        let s = solve_neutral_discounted(mdp, beta)?;
        let rows = mdp
            .states()
            .iter()
            .enumerate()
            .map(|(x, st)| vec![st.clone(), float(s.w[x]), mdp.actions()[s.rule.action(x)].clone()])
            .collect();
        let csv = csv_table(&["state", "value", "action"], rows)?;
        let doc = json!({
            "gamma": 0.0,
            "beta": beta,
            "value": per_state(mdp, "value", &s.w),
            "rule": labels(mdp, &s.rule),
            "rule_id": s.rule.index(mdp.l()),
            "policy_iteration_rounds": s.rounds,
        });
        return Ok(finish("discount", doc, Some(("levels.csv", csv)), format));
    }
    let z = anchor_index(mdp, anchor)?;
    let sol = solve_discounted(mdp, gamma, beta, tol, z, levels)?;
    let shown = levels.min(sol.horizon + 1);
    let mut rows = Vec::new();
    let mut level_docs = Vec::new();
    for n in 0..shown {
        let rep = sol.level_report(mdp, n);
        for (x, st) in mdp.states().iter().enumerate() {
            let argmax: Vec<&str> = rep.argmax[x].iter().map(|&a| mdp.actions()[a].as_str()).collect();
            rows.push(vec![
                n.to_string(),
                float(rep.gamma_n),
                st.clone(),
                float(rep.w[x]),
                mdp.actions()[rep.rule.action(x)].clone(),
                argmax.join("|"),
            ]);
        }
        let argmax: Vec<Vec<&str>> = rep
            .argmax
            .iter()
            .map(|s| s.iter().map(|&a| mdp.actions()[a].as_str()).collect())
            .collect();
        level_docs.push(json!({
            "level": n,
            "gamma_n": rep.gamma_n,
            "span": rep.span,
            "w": rep.w,
            "rule": labels(mdp, &rep.rule),
            "rule_id": rep.rule.index(mdp.l()),
            "argmax": argmax,
        }));
    }
    let csv = csv_table(&["level", "gamma_n", "state", "w", "action", "argmax"], rows)?;
    let doc = json!({
        "gamma": gamma,
        "beta": beta,
        "horizon": sol.horizon,
        "tail_bound": sol.tail_bound,
        "anchor": mdp.states()[z],
        "value": per_state(mdp, "value", &sol.value),
        "levels": level_docs,
    });
    Ok(finish("discount", doc, Some(("levels.csv", csv)), format))
}

fn evidence_rows(rows: &[EvidenceRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                float(r.beta),
                r.level.to_string(),
                r.rule_id.to_string(),
                float(r.lambda_rule),
                float(r.lambda_opt),
                r.member.to_string(),
            ]
        })
        .collect()
}

const BLACKWELL_HEADER: [&str; 6] = ["beta", "level", "rule_id", "lambda_rule", "lambda_opt", "member"];

fn blackwell(
    mdp: &Mdp,
    gamma: f64,
    level: usize,
    betas: Option<Vec<f64>>,
    tol: f64,
    format: Format,
) -> Result<Output> {
    let grid = betas.unwrap_or_else(default_beta_grid);
    if gamma == 0.0 {
        if level != 0 {
            return Err(UsageError("the risk-neutral check is stationary; use --level 0".into()).into());
        }
        let r = neutral_blackwell(mdp, &grid, 0)?;
        let rows: Vec<EvidenceRow> = r
            .rows
            .iter()
            .map(|row| EvidenceRow {
                beta: row.beta,
                level: 0,
                rule: row.rule.clone(),
                rule_id: row.rule_id,
                lambda_rule: row.lambda_rule,
                lambda_opt: r.lambda0,
                member: row.member,
            })
            .collect();
        let csv = csv_table(&BLACKWELL_HEADER, evidence_rows(&rows))?;
        let mut doc = serde_json::to_value(&r)?;
        doc["stable_rule_labels"] = labels(mdp, &r.stable_rule);
        return Ok(finish("blackwell", doc, Some(("blackwell.csv", csv)), format));
    }
    let r = blackwell_threshold(mdp, gamma, level, &grid, tol)?;
    let csv = csv_table(&BLACKWELL_HEADER, evidence_rows(&r.rows))?;
    Ok(finish("blackwell", serde_json::to_value(&r)?, Some(("blackwell.csv", csv)), format))
}

fn vanish(
    mdp: &Mdp,
    gamma: f64,
    betas: &[f64],
    n_max: usize,
    anchor: &Option<String>,
    tol: f64,
    format: Format,
) -> Result<Output> {
    if gamma == 0.0 {
        return Err(UsageError("the vanishing-discount trace needs --gamma != 0".into()).into());
    }
    let z = anchor_index(mdp, anchor)?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for &b in betas {
        let tr = vanishing_trace(mdp, gamma, b, z, n_max, tol)?;
        for e in &tr.entries {
            rows.push(vec![
                float(b),
                e.n.to_string(),
                float(e.lambda_n_over_gamma),
                opt_float(e.dist_lambda),
                opt_float(e.dist_w_sup),
            ]);
        }
        traces.push(tr);
    }
    let csv = csv_table(
        &["beta", "n", "lambda_n_over_gamma", "dist_lambda", "dist_w_sup"],
        rows,
    )?;
    let doc = json!({ "gamma": gamma, "anchor": mdp.states()[z], "traces": traces });
    Ok(finish("vanish", doc, Some(("vanish.csv", csv)), format))
}
