use serde::Serialize;
use sps::format::{csv_row, sig17};
use sps::{
    build_coefficients, certificate, fit_sum, fit_tail_limits, integrate, integrate_deviation, parse_system,
    step_count, CertificateOptions, Coefficients, LogisticParams, ReducedModel, Result, Spectral, SpsError, System,
    TailOptions, TruncationSpec,
};

use crate::args::{CoeffArgs, FitChoice, Format, LogisticArgs, ReduceArgs, RunArgs, Truncation};

pub const DEFAULT_TRUNCATION: TruncationSpec = TruncationSpec::PerIndex(3);
pub const DEFAULT_LOGISTIC_ORDER: u32 = 30;
/// Finest integration step used by `compare`.
pub const ORACLE_STEP: f64 = 1e-3;
/// Trajectory length used by `--fit tail`.
pub const TAIL_HORIZON: f64 = 40.0;
/// Work budget for the certificate behind the `compare` footer. Kept
/// below the `bounds` default so the comparison stays interactive.
pub const COMPARE_MAX_WORK: f64 = 5e9;

/// Rendered output of one command.
pub struct Rendered {
    pub text: String,
}

fn load(path: &std::path::Path, flag: &Truncation) -> Result<(System, TruncationSpec)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SpsError::Io(format!("cannot read {}: {e}", path.display())))?;
    let file = parse_system::<f64>(&text)?;
    let trunc = flag.spec().or(file.truncation).unwrap_or(DEFAULT_TRUNCATION);
    if trunc.value() < 1 {
        return Err(SpsError::InvalidArgument("truncation must be at least 1".into()));
    }
    Ok((sps::validate(file.system)?, trunc))
}

fn grid(t_end: f64, step: f64) -> Result<Vec<f64>> {
    let n = step_count(t_end, step)?;
    Ok((0..=n).map(|k| step * k as f64).collect())
}

fn header(lead: &[&str], groups: &[(&str, usize)]) -> String {
    let mut cols: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    for &(suffix, m) in groups {
        cols.extend((1..=m).map(|i| format!("x{i}{suffix}")));
    }
    cols.join(",")
}

#[derive(Serialize)]
struct Table<'a, F: Serialize> {
    columns: Vec<String>,
    rows: &'a [Vec<f64>],
    #[serde(skip_serializing_if = "Option::is_none")]
    footer: Option<F>,
}

fn render_table<F: Serialize>(format: Format, columns: String, rows: &[Vec<f64>], footer: Option<(F, String)>) -> String {
    match format {
        Format::Csv => {
            let mut out = columns;
            out.push('\n');
            for r in rows {
                csv_row(&mut out, &[], r);
            }
            if let Some((_, line)) = footer {
                out.push_str(&line);
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let table = Table {
                columns: columns.split(',').map(str::to_string).collect(),
                rows,
                footer: footer.map(|f| f.0),
            };
            json(&table)
        }
    }
}

fn json<S: Serialize>(v: &S) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

struct Fitted {
    system: System,
    spectral: Spectral,
    series: Coefficients,
    p: Vec<f64>,
}

fn fitted_series(system: System, trunc: TruncationSpec, fit: FitChoice) -> Result<Fitted> {
    let x0 = system.require_x0()?.to_vec();
    let spectral = Spectral::analyze(&system)?;
    let unit = build_coefficients(&system, &spectral, trunc)?;
    let p = match fit {
        FitChoice::Sum => fit_sum(&unit, &x0, 0.0)?.p,
        FitChoice::Tail => {
            let traj = integrate_deviation(&system, &spectral.c, &x0, TAIL_HORIZON, ORACLE_STEP)?;
            fit_tail_limits(&traj, &system, &spectral, &TailOptions::default())?.p
        }
    };
    let series = unit.scale_free_parameters(&p);
    Ok(Fitted {
        system,
        spectral,
        series,
        p,
    })
}

pub fn solve(a: &RunArgs) -> Result<Rendered> {
    let (system, trunc) = load(&a.input, &a.truncation)?;
    let times = grid(a.grid.t_end, a.grid.step)?;
    let f = fitted_series(system, trunc, a.fit)?;
    let m = f.system.dim();
    let mut rows = Vec::with_capacity(times.len());
    for &t in &times {
        let mut row = vec![t];
        row.extend(f.series.evaluate(t)?);
        rows.push(row);
    }
    let format = a.output.format.unwrap_or(Format::Csv);
    let text = render_table::<()>(format, header(&["t"], &[("_sps", m)]), &rows, None);
    Ok(Rendered { text })
}

#[derive(Serialize)]
struct CompareFooter {
    t0: f64,
    sup_error: f64,
    certificate_partial: bool,
    free_params: Vec<f64>,
}

pub fn compare(a: &RunArgs) -> Result<Rendered> {
    let (system, trunc) = load(&a.input, &a.truncation)?;
    let n = step_count(a.grid.t_end, a.grid.step)?;
    let sub = (a.grid.step / ORACLE_STEP - 1e-9).ceil().max(1.0) as usize;
    let h = a.grid.step / sub as f64;
    let f = fitted_series(system, trunc, a.fit)?;
    let m = f.system.dim();
    let x0 = f.system.require_x0()?.to_vec();
    let traj = integrate(&f.system, &x0, a.grid.step * n as f64, h)?;
    let opts = CertificateOptions {
        max_work: COMPARE_MAX_WORK,
        ..CertificateOptions::default()
    };
    let cert = certificate(&f.system, &f.spectral, Some(&f.p), &opts)?;
    let mut rows = Vec::with_capacity(n + 1);
    let mut sup = 0.0f64;
    for k in 0..=n {
        let idx = k * sub;
        let t = traj.times()[idx];
        let s = f.series.evaluate(t)?;
        let o = traj.state(idx);
        let err = s.iter().zip(&o).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
        if t >= cert.t0 {
            sup = sup.max(err);
        }
        let mut row = vec![t];
        row.extend(&s);
        row.extend(&o);
        row.push(err);
        rows.push(row);
    }
    let columns = format!("{},error", header(&["t"], &[("_sps", m), ("_oracle", m)]));
    let footer = CompareFooter {
        t0: cert.t0,
        sup_error: sup,
        certificate_partial: cert.partial,
        free_params: f.p.clone(),
    };
    let line = format!("sup_error_t_ge_t0,{},{}", sig17(cert.t0), sig17(sup));
    let format = a.output.format.unwrap_or(Format::Csv);
    Ok(Rendered {
        text: render_table(format, columns, &rows, Some((footer, line))),
    })
}

#[derive(Serialize)]
struct CoeffEntry<'a> {
    n: &'a [u32],
    alpha: Vec<f64>,
}

#[derive(Serialize)]
struct CoeffDoc<'a> {
    truncation: TruncationSpec,
    lambda: &'a [f64],
    c: &'a [f64],
    anchors: Vec<usize>,
    entries: Vec<CoeffEntry<'a>>,
}

pub fn coeffs(a: &CoeffArgs) -> Result<Rendered> {
    let (system, trunc) = load(&a.input, &a.truncation)?;
    let spectral = Spectral::analyze(&system)?;
    let unit = build_coefficients(&system, &spectral, trunc)?;
    let text = match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => unit.to_csv(),
        Format::Json => json(&CoeffDoc {
            truncation: trunc,
            lambda: unit.lambda(),
            c: &spectral.c,
            anchors: unit.anchors().iter().map(|&i| i + 1).collect(),
            entries: unit
                .iter()
                .map(|(n, alpha)| CoeffEntry {
                    n: n.components(),
                    alpha,
                })
                .collect(),
        }),
    };
    Ok(Rendered { text })
}

pub fn bounds(a: &CoeffArgs) -> Result<Rendered> {
    let (system, trunc) = load(&a.input, &a.truncation)?;
    let spectral = Spectral::analyze(&system)?;
    let params = match system.x0() {
        Some(x0) => {
            let unit = build_coefficients(&system, &spectral, trunc)?;
            Some(fit_sum(&unit, x0, 0.0)?.p)
        }
        None => None,
    };
    let cert = certificate(&system, &spectral, params.as_deref(), &CertificateOptions::default())?;
    let text = match a.output.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut s = cert.to_json();
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut out = String::from("field,value\n");
            for (name, v) in [("n0", cert.n0), ("n1", cert.n1), ("n2", cert.n2), ("degree_scanned", cert.degree_scanned)] {
                out.push_str(&format!("{name},{v}\n"));
            }
            for (name, v) in [
                ("k", cert.k),
                ("t0", cert.t0),
                ("k_unit", cert.k_unit),
                ("t0_unit", cert.t0_unit),
                ("delta", cert.delta),
                ("opnorm_a", cert.opnorm_a),
                ("opnorm_j", cert.opnorm_j),
                ("opnorm_inverse_bound", cert.opnorm_inverse_bound),
                ("lambda1", cert.lambda1),
            ] {
                csv_row(&mut out, &[name.to_string()], &[v]);
            }
            for (i, &p) in cert.free_params.iter().enumerate() {
                csv_row(&mut out, &[format!("p{}", i + 1)], &[p]);
            }
            out.push_str(&format!("partial,{}\n", cert.partial));
            out
        }
    };
    Ok(Rendered { text })
}

pub fn reduce(a: &ReduceArgs) -> Result<Rendered> {
    let (system, _) = load(&a.input, &Truncation {
        truncation: None,
        total_degree: None,
    })?;
    let model = ReducedModel::new(&system, a.keep)?;
    let text = match a.output.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut s = model.to_json();
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut out = String::from("quantity");
            for i in 1..=system.dim() {
                out.push_str(&format!(",v{i}"));
            }
            out.push('\n');
            for (name, v) in [
                ("delta", &model.delta),
                ("gamma", &model.gamma),
                ("gamma_star", &model.gamma_star),
                ("c_hat", &model.c_hat),
                ("lambda_hat", &model.lambda_hat),
                ("c", &model.c),
                ("lambda", &model.lambda),
            ] {
                csv_row(&mut out, &[name.to_string()], v);
            }
            out
        }
    };
    Ok(Rendered { text })
}

#[derive(Serialize)]
struct LogisticDoc<'a> {
    params: LogisticParams<f64>,
    order: u32,
    alpha: Vec<f64>,
    t0_exact: f64,
    t0_unclamped: f64,
    columns: [&'a str; 4],
    rows: &'a [Vec<f64>],
}

pub fn logistic(a: &LogisticArgs) -> Result<Rendered> {
    let params = LogisticParams::new(a.r, a.k, a.x0)?;
    let order = a.truncation.spec().map_or(DEFAULT_LOGISTIC_ORDER, TruncationSpec::value);
    let times = grid(a.grid.t_end, a.grid.step)?;
    let rows: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| {
            let exact = params.closed_form(t);
            let series = params.series_value(order as usize, t);
            vec![t, exact, series, (series - exact).abs()]
        })
        .collect();
    let columns = ["t", "closed_form", "series", "abs_error"];
    let text = match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => render_table::<()>(Format::Csv, columns.join(","), &rows, None),
        Format::Json => json(&LogisticDoc {
            params,
            order,
            alpha: params.series_coefficients(order as usize),
            t0_exact: params.t0_exact(),
            t0_unclamped: params.t0_unclamped(),
            columns,
            rows: &rows,
        }),
    };
    Ok(Rendered { text })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_interval() {
        let g = grid(1.0, 0.25).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(grid(10.0, 0.1).unwrap().len(), 101);
        assert!(grid(1.0, 0.0).is_err());
    }

    #[test]
    fn header_layout() {
        assert_eq!(header(&["t"], &[("_sps", 2), ("_oracle", 2)]), "t,x1_sps,x2_sps,x1_oracle,x2_oracle");
    }
}
