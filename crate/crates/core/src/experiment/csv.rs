//! CSV output of experiment results.
//!
//! Numbers are written as `{:.16e}` (17 significant digits), which
//! round-trips every finite `f64` exactly. Lines end in LF.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::ExperimentResult;
use crate::smc::BernoulliEstimate;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn into_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

fn header(result: &ExperimentResult, tail: &[&str]) -> Vec<String> {
    result
        .domain
        .names()
        .into_iter()
        .chain(tail.iter().map(|s| s.to_string()))
        .collect()
}

/// Writes both tables to arbitrary sinks.
pub fn write_csv_to(result: &ExperimentResult, predictions: impl Write, training: impl Write) -> io::Result<()> {
    let mut w = writer(predictions);
    w.write_record(header(result, &["prob_mean", "ci_low", "ci_high"]))
        .map_err(into_io)?;
    for p in &result.predictions {
        let row = p
            .point
            .iter()
            .chain([&p.prob_mean, &p.ci_low, &p.ci_high])
            .map(|&x| num(x));
        w.write_record(row).map_err(into_io)?;
    }
    w.flush()?;

    let mut w = writer(training);
    w.write_record(header(result, &["successes", "trials", "empirical"]))
        .map_err(into_io)?;
    for (x, o) in result.training_points.iter().zip(&result.observations) {
        let row: Vec<String> = x
            .iter()
            .map(|&v| num(v))
            .chain([o.successes.to_string(), o.trials.to_string(), num(o.fraction())])
            .collect();
        w.write_record(row).map_err(into_io)?;
    }
    w.flush()
}

fn meta_path(predictions: &Path) -> PathBuf {
    let mut s = predictions.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Run metadata as `key=value` lines.
pub fn metadata(result: &ExperimentResult) -> String {
    let k = result.kernel();
    let join = |xs: &[f64]| xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";");
    let mut lines = vec![
        format!("seed={}", result.seed),
        format!("runs_per_point={}", result.runs_per_point),
        format!("training_points={}", result.training_points.len()),
        format!("prediction_points={}", result.predictions.len()),
        format!("scaling={}", result.scaling.name()),
        format!("kernel_amplitude={}", num(k.amplitude)),
        format!("kernel_lengthscales={}", join(&k.lengthscales)),
        format!("kernel_jitter={}", num(k.jitter)),
    ];
    for r in result.domain.varied() {
        lines.push(format!("range.{}={}:{}", r.name, num(r.low), num(r.high)));
    }
    for (name, v) in result.domain.fixed() {
        lines.push(format!("fixed.{name}={}", num(*v)));
    }
    let st = &result.state;
    lines.extend([
        format!("ep_sweeps={}", st.sweeps()),
        format!("ep_converged={}", st.converged()),
        format!("ep_log_marginal={}", num(st.log_marginal())),
        format!("time_simulation_s={:.6}", result.timings.simulation.as_secs_f64()),
        format!("time_hyperopt_s={:.6}", result.timings.hyperopt.as_secs_f64()),
        format!("time_prediction_s={:.6}", result.timings.prediction.as_secs_f64()),
    ]);
    lines.iter().map(|l| format!("{l}\n")).collect()
}

/// Writes `predictions_path`, `training_path` and the `<predictions_path>.meta`
/// sidecar, replacing existing files.
pub fn write_csv(result: &ExperimentResult, predictions_path: &Path, training_path: &Path) -> io::Result<()> {
    let p = BufWriter::new(File::create(predictions_path)?);
    let t = BufWriter::new(File::create(training_path)?);
    write_csv_to(result, p, t)?;
    std::fs::write(meta_path(predictions_path), metadata(result))
}

/// Writes baseline estimates, one row per probe point.
pub fn write_baseline_csv(
    path: &Path,
    names: &[String],
    probes: &[Vec<f64>],
    estimates: &[BernoulliEstimate],
) -> io::Result<()> {
    let mut w = writer(BufWriter::new(File::create(path)?));
    let head = names
        .iter()
        .cloned()
        .chain(["p_hat", "ci_low", "ci_high", "successes", "trials"].map(String::from));
    w.write_record(head).map_err(into_io)?;
    for (x, e) in probes.iter().zip(estimates) {
        let row: Vec<String> = x
            .iter()
            .chain([&e.p_hat, &e.ci_low, &e.ci_high])
            .map(|&v| num(v))
            .chain([e.successes.to_string(), e.trials.to_string()])
            .collect();
        w.write_record(row).map_err(into_io)?;
    }
    w.flush()
}

/// One parsed data row.
pub type CsvRow = Vec<f64>;

/// Reads a numeric CSV written by this module: header names and rows.
pub fn read_predictions_csv(path: &Path) -> io::Result<(Vec<String>, Vec<CsvRow>)> {
    let mut r = csv::Reader::from_path(path).map_err(into_io)?;
    let head = r.headers().map_err(into_io)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(into_io)?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("`{f}`: {e}")))
            })
            .collect::<io::Result<_>>()?;
        rows.push(row);
    }
    Ok((head, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{run_smoothed_mc, Design, ExperimentConfig, KernelMode, ParamRange, ParameterDomain};
    use crate::gp::KernelConfig;
    use crate::mitl::parse_formula;
    use crate::model::parse_model;

    fn result(dim: usize) -> ExperimentResult {
        let model = parse_model("species N=0\nparam a=1 b=1\nreaction 0 -> N @ a*b").unwrap();
        let f = parse_formula("G[0,1] (N < 2)").unwrap();
        let varied = [("a", 0.5, 2.0), ("b", 1.0, 3.0)][..dim]
            .iter()
            .map(|&(n, low, high)| ParamRange {
                name: n.into(),
                low,
                high,
            })
            .collect();
        let domain = ParameterDomain::new(varied, vec![]).unwrap();
        let cfg = ExperimentConfig::new(
            Design::Grid(vec![3; dim]),
            5,
            vec![2; dim],
            KernelMode::Fixed(KernelConfig::isotropic(1.0, 1.0, dim).unwrap()),
            7,
        );
        run_smoothed_mc(&model, &f, &domain, &cfg, None).unwrap()
    }

    #[test]
    fn layout_and_round_trip() {
        let res = result(1);
        let dir = tempfile::tempdir().unwrap();
        let (p, t) = (dir.path().join("predictions.csv"), dir.path().join("training.csv"));
        write_csv(&res, &p, &t).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("a,prob_mean,ci_low,ci_high\n"));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 3);
        let (head, rows) = read_predictions_csv(&p).unwrap();
        assert_eq!(head.len(), 4);
        for (row, pred) in rows.iter().zip(&res.predictions) {
            assert!((row[1] - pred.prob_mean).abs() < 1e-12);
            assert_eq!(row[2], pred.ci_low);
        }
        let training = std::fs::read_to_string(&t).unwrap();
        assert!(training.starts_with("a,successes,trials,empirical\n"));
        assert_eq!(training.lines().count(), 4);
        let meta = std::fs::read_to_string(dir.path().join("predictions.csv.meta")).unwrap();
        assert!(meta.contains("seed=7\n") && meta.contains("kernel_amplitude=") && meta.contains("range.a="));
    }

    #[test]
    fn two_dimensional_columns() {
        let res = result(2);
        let (mut p, mut t) = (Vec::new(), Vec::new());
        write_csv_to(&res, &mut p, &mut t).unwrap();
        let p = String::from_utf8(p).unwrap();
        assert!(p.starts_with("a,b,prob_mean,ci_low,ci_high\n"));
        assert_eq!(p.lines().count(), 5);
        assert!(p.lines().skip(1).all(|l| l.split(',').count() == 5));
    }

    #[test]
    fn byte_identical_reruns() {
        let (mut p1, mut t1, mut p2, mut t2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        write_csv_to(&result(2), &mut p1, &mut t1).unwrap();
        write_csv_to(&result(2), &mut p2, &mut t2).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn format_round_trips_awkward_values() {
        for x in [0.1, 1.0 / 3.0, 5e-324, f64::MAX, -2.5e-17, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn missing_directory_is_an_io_error() {
        let res = result(1);
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("nope").join("p.csv");
        assert!(write_csv(&res, &bad, &dir.path().join("t.csv")).is_err());
    }
}
