use anyhow::{bail, ensure, Context, Result};
use mixnorm_core::lab::{divergence_probe, Estimator, ProbeGrid, ProbePoint};
use mixnorm_core::{mixed_norm, DomainMask, Error as CoreError, ScalarFn, Strategy};
use serde_json::json;

use crate::config::{Experiment, OperatorSpec};
use crate::report::{Outcome, Table};

/// Ratios may exceed a formula value by this much before it counts as a violation.
pub const FORMULA_TOL: f64 = 1e-2;

fn check_formula(violations: &mut Vec<String>, what: &str, value: f64, formula: Option<f64>) {
    if let Some(bound) = formula {
        if value > bound * (1.0 + FORMULA_TOL) {
            violations.push(format!("{what} {value} exceeds the formula value {bound}"));
        }
    }
}

pub fn norm(exp: &Experiment) -> Result<Outcome> {
    let (grid, mask) = exp.domain(1)?;
    let f = exp.function(&grid, &mask)?;
    let value = mixed_norm(&f, &exp.p)?;
    Ok(Outcome {
        results: json!({
            "mixed_norm": value,
            "p": exp.p.as_slice(),
            "nodes": grid.len(),
            "masked_nodes": mask.count(),
        }),
        ..Outcome::default()
    })
}

/// Apply the configured operator to the configured function. `kinds` lists
/// the operator kinds the subcommand accepts; the first is used when the
/// configuration has no operator.
pub fn apply(exp: &Experiment, kinds: &[&str]) -> Result<Outcome> {
    let spec = match &exp.config.operator {
        Some(spec) => {
            ensure!(
                kinds.contains(&spec.kind()),
                "this subcommand applies {} operators, the configuration has a {} operator",
                kinds.join(" or "),
                spec.kind()
            );
            spec.clone()
        }
        None if kinds[0] == "hardy" => OperatorSpec::Hardy,
        None => bail!("configuration has no `operator`"),
    };
    let (grid, mask) = exp.domain(1)?;
    let f = exp.function(&grid, &mask)?;
    let built = exp.operator(&spec, &grid, &mask, 1)?;
    let tf = built.op.apply(&f)?;
    let input = mixed_norm(&f, &exp.q)?;
    let output = mixed_norm(&tf, &exp.p)?;
    let ratio = (input > 0.0).then(|| output / input);

    let mut violations = Vec::new();
    if let Some(r) = ratio {
        check_formula(&mut violations, "ratio", r, built.formula);
    }
    let positive = matches!(spec, OperatorSpec::Hardy | OperatorSpec::Product(_) | OperatorSpec::Steklov(_));
    if positive && f.is_nonnegative() && !tf.is_nonnegative() {
        violations.push(format!("{} operator produced negative values from a nonnegative input", spec.kind()));
    }
    Ok(Outcome {
        results: json!({
            "operator": spec.kind(),
            "input_norm": input,
            "output_norm": output,
            "ratio": ratio,
            "formula": built.formula,
            "input_nodes": grid.len(),
            "output_nodes": tf.grid().len(),
            "uncovered": built.uncovered,
        }),
        table: None,
        violations,
    })
}

pub fn estimate(exp: &Experiment, seed: u64, budget: usize, strategy: Strategy) -> Result<Outcome> {
    let spec = exp.operator_spec()?;
    let (grid, mask) = exp.domain(1)?;
    let built = exp.operator(spec, &grid, &mask, 1)?;
    let mut report = Estimator::new(built.op.as_ref(), &exp.q, &exp.p, seed)?.run(strategy, budget)?;
    let mut violations = Vec::new();
    if let Some(v) = built.formula {
        report = report.with_formula(v);
        if report.violates_formula(FORMULA_TOL) {
            violations.push(format!(
                "empirical lower bound {} exceeds the formula value {v}",
                report.empirical_lower
            ));
        }
    }
    let rows = report
        .progress
        .iter()
        .map(|pt| vec![pt.sample.to_string(), pt.best.to_string()])
        .collect();
    Ok(Outcome {
        results: serde_json::to_value(&report)?,
        table: Some(Table {
            header: vec!["sample", "best"],
            rows,
        }),
        violations,
    })
}

fn probe_trace(exp: &Experiment, radii: &[f64], resolution: ProbeGrid) -> Result<Vec<ProbePoint>> {
    let n = exp.p.len();
    let nodes = resolution.cells.checked_pow(n as u32).unwrap_or(usize::MAX);
    ensure!(
        nodes <= exp.max_nodes,
        "probe grid of {nodes} nodes exceeds the node budget of {} (raise it with --max-nodes)",
        exp.max_nodes
    );
    let spec = exp.operator_spec()?;
    let src = exp.config.function.as_deref().context("configuration has no `function`")?;
    let labels = mixnorm_core::expr::indexed_names("y", n);
    let vars: Vec<&str> = labels.iter().map(String::as_str).collect();
    let f = ScalarFn::parse(src, &vars).with_context(|| format!("in function {src:?}"))?;
    let trace = divergence_probe(
        |g| {
            let mask = DomainMask::full(g.shape());
            exp.operator(spec, g, &mask, 1)
                .map(|b| b.op)
                .map_err(|e| CoreError::Config(format!("{e:#}")))
        },
        &f,
        &exp.p,
        radii,
        resolution,
    )?;
    Ok(trace)
}

fn resolution(exp: &Experiment) -> Result<(Vec<f64>, ProbeGrid)> {
    let spec = exp.config.probe.as_ref().context("configuration has no `probe` section")?;
    let default = ProbeGrid::default();
    Ok((
        spec.truncations.clone(),
        ProbeGrid {
            cells: spec.cells.unwrap_or(default.cells),
            scale: spec.scale.unwrap_or(default.scale),
        },
    ))
}

pub fn probe(exp: &Experiment) -> Result<Outcome> {
    let (radii, res) = resolution(exp)?;
    let trace = probe_trace(exp, &radii, res)?;
    let increasing = trace.windows(2).all(|w| w[0].value < w[1].value);
    let rows = trace
        .iter()
        .map(|t| vec![t.radius.to_string(), t.nodes.to_string(), t.value.to_string()])
        .collect();
    Ok(Outcome {
        results: json!({ "trace": trace, "increasing": increasing }),
        table: Some(Table {
            header: vec!["radius", "nodes", "value"],
            rows,
        }),
        violations: Vec::new(),
    })
}

/// Value of the experiment at refinement `factor`: the operator ratio when an
/// operator is configured, the mixed norm of the function otherwise.
fn level_value(exp: &Experiment, factor: usize) -> Result<(Vec<usize>, f64)> {
    let (grid, mask) = exp.domain(factor)?;
    let f = exp.function(&grid, &mask)?;
    let value = match &exp.config.operator {
        None => mixed_norm(&f, &exp.p)?,
        Some(spec) => {
            let built = exp.operator(spec, &grid, &mask, factor)?;
            let input = mixed_norm(&f, &exp.q)?;
            ensure!(input > 0.0, "the function has zero norm");
            mixed_norm(&built.op.apply(&f)?, &exp.p)? / input
        }
    };
    Ok((grid.shape().to_vec(), value))
}

/// Each level doubles the cells per axis. For probe configurations each level
/// also scales the truncation radius by the ratio of the first two truncations.
pub fn refine(exp: &Experiment, levels: usize) -> Result<Outcome> {
    ensure!(levels >= 2, "refinement needs at least two levels");
    ensure!(levels <= usize::BITS as usize, "too many levels");
    let mut rows = Vec::with_capacity(levels);
    let mut prev: Option<f64> = None;
    for level in 0..levels {
        let factor = 1usize << level;
        let (shape, value) = if exp.config.probe.is_some() {
            let (radii, res) = resolution(exp)?;
            let growth = match radii.as_slice() {
                [a, b, ..] => b / a,
                _ => 10.0,
            };
            let r = radii.first().copied().context("probe needs at least one truncation")? * growth.powi(level as i32);
            let res = ProbeGrid {
                cells: res.cells * factor,
                scale: res.scale,
            };
            let trace = probe_trace(exp, &[r], res)?;
            (vec![res.cells; exp.p.len()], trace[0].value)
        } else {
            level_value(exp, factor)?
        };
        rows.push((level + 1, shape, value, prev.map(|p| value - p)));
        prev = Some(value);
    }
    let json_rows: Vec<_> = rows
        .iter()
        .map(|(level, m, value, delta)| json!({ "level": level, "m": m, "value": value, "delta": delta }))
        .collect();
    let table_rows = rows
        .iter()
        .map(|(level, m, value, delta)| {
            vec![
                level.to_string(),
                m.iter().map(usize::to_string).collect::<Vec<_>>().join("x"),
                value.to_string(),
                delta.map(|d| d.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    Ok(Outcome {
        results: json!({ "rows": json_rows }),
        table: Some(Table {
            header: vec!["level", "m", "value", "delta"],
            rows: table_rows,
        }),
        violations: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_tolerance() {
        let mut v = Vec::new();
        check_formula(&mut v, "ratio", 2.0 * (1.0 + FORMULA_TOL) * 0.999, Some(2.0));
        check_formula(&mut v, "ratio", 5.0, None);
        assert!(v.is_empty());
        check_formula(&mut v, "ratio", 2.1, Some(2.0));
        assert_eq!(v.len(), 1);
    }
}
