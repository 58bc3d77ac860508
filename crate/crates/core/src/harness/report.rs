use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use super::config::{Algorithm, ExperimentConfig};
use super::run::EpisodeRecord;
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 8] = [
    "seed",
    "episode",
    "score",
    "win",
    "greedy_score",
    "margin",
    "epsilon",
    "wall_ms",
];

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Csv {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the header and one row per record. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv<W: Write>(records: &[EpisodeRecord], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(CSV_HEADER).map_err(csv_error)?;
    for r in records {
        out.write_record([
            r.seed.to_string(),
            r.episode.to_string(),
            r.score.to_string(),
            u8::from(r.win).to_string(),
            cell(r.greedy_score),
            cell(r.margin),
            r.epsilon.to_string(),
            cell(r.wall_ms),
        ])
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = row.get(i).unwrap_or("");
    raw.parse().map_err(|_| Error::Csv {
        line,
        message: format!("bad {} '{raw}'", CSV_HEADER[i]),
    })
}

fn optional(row: &csv::StringRecord, i: usize, line: usize) -> Result<Option<f64>> {
    match row.get(i) {
        None | Some("") => Ok(None),
        Some(_) => field(row, i, line).map(Some),
    }
}

/// Reads a metrics CSV written by [`write_csv`].
pub fn parse_csv<R: Read>(r: R) -> Result<Vec<EpisodeRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Csv {
            line: 1,
            message: "unexpected header".into(),
        });
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let win: u8 = field(&row, 3, line)?;
        if win > 1 {
            return Err(Error::Csv {
                line,
                message: format!("bad win '{win}'"),
            });
        }
        out.push(EpisodeRecord {
            seed: field(&row, 0, line)?,
            episode: field(&row, 1, line)?,
            score: field(&row, 2, line)?,
            win: win == 1,
            greedy_score: optional(&row, 4, line)?,
            margin: optional(&row, 5, line)?,
            epsilon: field(&row, 6, line)?,
            wall_ms: optional(&row, 7, line)?,
        });
    }
    Ok(out)
}

/// The configuration stored next to a metrics file, if present.
pub fn read_sidecar(csv_path: &Path) -> Result<Option<ExperimentConfig>> {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".cfg");
    match std::fs::read_to_string(&name) {
        Ok(text) => ExperimentConfig::from_text(&text).map(Some),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-episode statistics across seeds (population standard deviation).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub episode: usize,
    pub runs: usize,
    pub score_mean: f64,
    pub score_std: f64,
    pub win_rate: f64,
    pub greedy_mean: Option<f64>,
    pub greedy_std: Option<f64>,
    pub margin_mean: Option<f64>,
    pub margin_std: Option<f64>,
}

pub fn aggregate(records: &[EpisodeRecord]) -> Result<Vec<AggregateRow>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut by_episode: BTreeMap<usize, Vec<&EpisodeRecord>> = BTreeMap::new();
    for r in records {
        by_episode.entry(r.episode).or_default().push(r);
    }
    Ok(by_episode
        .into_iter()
        .map(|(episode, rows)| {
            let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
            let (score_mean, score_std) = mean_std(&scores);
            let wins = rows.iter().filter(|r| r.win).count() as f64;
            let greedy: Vec<f64> = rows.iter().filter_map(|r| r.greedy_score).collect();
            let margins: Vec<f64> = rows.iter().filter_map(|r| r.margin).collect();
            let g = (!greedy.is_empty()).then(|| mean_std(&greedy));
            let m = (!margins.is_empty()).then(|| mean_std(&margins));
            AggregateRow {
                episode,
                runs: rows.len(),
                score_mean,
                score_std,
                win_rate: wins / rows.len() as f64,
                greedy_mean: g.map(|v| v.0),
                greedy_std: g.map(|v| v.1),
                margin_mean: m.map(|v| v.0),
                margin_std: m.map(|v| v.1),
            }
        })
        .collect())
}

pub fn write_aggregate<W: Write>(rows: &[AggregateRow], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record([
        "episode",
        "runs",
        "score_mean",
        "score_std",
        "win_rate",
        "greedy_mean",
        "greedy_std",
        "margin_mean",
        "margin_std",
    ])
    .map_err(csv_error)?;
    for r in rows {
        out.write_record([
            r.episode.to_string(),
            r.runs.to_string(),
            r.score_mean.to_string(),
            r.score_std.to_string(),
            r.win_rate.to_string(),
            cell(r.greedy_mean),
            cell(r.greedy_std),
            cell(r.margin_mean),
            cell(r.margin_std),
        ])
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Final-window statistics of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub env: String,
    pub algo: String,
    pub reward: String,
    pub runs: usize,
    pub episodes: usize,
    /// Number of trailing episodes averaged.
    pub window: usize,
    pub final_score: f64,
    pub final_win_rate: f64,
    /// Mean greedy score of the evaluations inside the window.
    pub final_greedy: Option<f64>,
    /// Mean over runs of the total training wall time.
    pub mean_wall_ms: Option<f64>,
}

/// Summarizes one experiment. The window is the configured evaluation
/// interval when `cfg` is given, otherwise episodes / 20.
pub fn summarize(records: &[EpisodeRecord], cfg: Option<&ExperimentConfig>) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let episodes = records.iter().map(|r| r.episode).max().unwrap_or(1);
    let window = cfg
        .map(|c| c.eval_interval())
        .unwrap_or((episodes / 20).max(1))
        .min(episodes);
    let tail: Vec<&EpisodeRecord> = records
        .iter()
        .filter(|r| r.episode + window > episodes)
        .collect();
    let n = tail.len() as f64;
    let greedy: Vec<f64> = tail.iter().filter_map(|r| r.greedy_score).collect();

    let mut per_run: BTreeMap<u64, Option<f64>> = BTreeMap::new();
    for r in records {
        let slot = per_run.entry(r.seed).or_insert(Some(0.0));
        *slot = match (*slot, r.wall_ms) {
            (Some(total), Some(ms)) => Some(total + ms),
            _ => None,
        };
    }
    let totals: Option<Vec<f64>> = per_run.values().copied().collect();

    let label = |f: fn(&ExperimentConfig) -> String| cfg.map(f).unwrap_or_else(|| "unknown".into());
    Ok(Summary {
        env: label(|c| c.env.to_string()),
        algo: label(|c| c.algo.to_string()),
        reward: label(|c| c.reward.to_string()),
        runs: per_run.len(),
        episodes,
        window,
        final_score: tail.iter().map(|r| r.score).sum::<f64>() / n,
        final_win_rate: tail.iter().filter(|r| r.win).count() as f64 / n,
        final_greedy: (!greedy.is_empty()).then(|| greedy.iter().sum::<f64>() / greedy.len() as f64),
        mean_wall_ms: totals.map(|t| t.iter().sum::<f64>() / t.len() as f64),
    })
}

/// Ordinal over numeric training time for matching experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeRatio {
    pub env: String,
    pub ordinal: String,
    pub numeric: String,
    pub ratio: f64,
}

/// Pairs every ordinal summary with the numeric learner of the same family
/// on the same environment and episode count.
pub fn time_ratios(summaries: &[Summary]) -> Vec<TimeRatio> {
    let mut out = Vec::new();
    for ord in summaries {
        let Ok(algo) = ord.algo.parse::<Algorithm>() else {
            continue;
        };
        if !algo.is_ordinal() {
            continue;
        }
        let numeric = algo.numeric_counterpart().to_string();
        for num in summaries
            .iter()
            .filter(|s| s.algo == numeric && s.env == ord.env && s.episodes == ord.episodes)
        {
            if let (Some(a), Some(b)) = (ord.mean_wall_ms, num.mean_wall_ms) {
                out.push(TimeRatio {
                    env: ord.env.clone(),
                    ordinal: ord.algo.clone(),
                    numeric: format!("{}/{}", num.algo, num.reward),
                    ratio: a / b,
                });
            }
        }
    }
    out
}

/// Plain-text table of summaries and time ratios.
pub fn format_summaries(summaries: &[Summary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<9} {:<12} {:<9} {:>4} {:>8} {:>6} {:>12} {:>9} {:>12} {:>12}",
        "env", "algo", "reward", "runs", "episodes", "window", "final_score", "win_rate", "greedy", "wall_ms"
    );
    for x in summaries {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:<9} {:<12} {:<9} {:>4} {:>8} {:>6} {:>12.3} {:>9.3} {:>12} {:>12}",
            x.env,
            x.algo,
            x.reward,
            x.runs,
            x.episodes,
            x.window,
            x.final_score,
            x.final_win_rate,
            opt(x.final_greedy),
            opt(x.mean_wall_ms)
        );
    }
    for r in time_ratios(summaries) {
        let _ = writeln!(s, "time ratio {} {} / {}: {:.3}", r.env, r.ordinal, r.numeric, r.ratio);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64, episode: usize, score: f64) -> EpisodeRecord {
        EpisodeRecord {
            seed,
            episode,
            score,
            win: score >= 200.0,
            greedy_score: (episode % 2 == 0).then_some(score + 1.0),
            margin: Some(0.1 * episode as f64),
            epsilon: 1.0 / 3.0,
            wall_ms: Some(1.5),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut records = vec![record(0, 1, 12.0), record(0, 2, 200.0), record(3, 1, 0.1 + 0.2)];
        records[2].wall_ms = None;
        records[2].margin = None;
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("seed,episode,score,win,greedy_score,margin,epsilon,wall_ms\n"));
        assert!(!text.contains('\r'));
        // missing values are empty cells
        assert!(text.contains("\n0,1,12,0,,0.1,0.3333333333333333,1.5\n"));
        assert!(text.ends_with(",0.3333333333333333,\n"));
        assert_eq!(parse_csv(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn csv_errors_report_lines() {
        let bad = "seed,episode,score,win,greedy_score,margin,epsilon,wall_ms\n0,1,2,0,,,1,\n0,x,2,0,,,1,\n";
        match parse_csv(bad.as_bytes()) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_csv("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn single_record_summary_is_that_record() {
        let r = record(0, 1, 42.0);
        let s = summarize(&[r.clone()], None).unwrap();
        assert_eq!(s.final_score, 42.0);
        assert_eq!(s.final_win_rate, 0.0);
        assert_eq!(s.window, 1);
        assert_eq!(s.mean_wall_ms, Some(1.5));
        assert!(matches!(summarize(&[], None), Err(Error::EmptyInput)));
    }

    #[test]
    fn final_window_and_wall_time() {
        let mut cfg = ExperimentConfig::default();
        cfg.eval_every = Some(2);
        let mut records = Vec::new();
        for seed in 0..2 {
            for e in 1..=4 {
                records.push(record(seed, e, e as f64 * 10.0 + seed as f64));
            }
        }
        let s = summarize(&records, Some(&cfg)).unwrap();
        assert_eq!(s.window, 2);
        assert!((s.final_score - 35.5).abs() < 1e-12);
        assert_eq!(s.final_greedy, Some(41.5));
        assert_eq!(s.mean_wall_ms, Some(6.0));
        assert_eq!(s.runs, 2);
    }

    #[test]
    fn equal_times_give_unit_ratio() {
        let base = summarize(&[record(0, 1, 1.0)], None).unwrap();
        let mut ord = base.clone();
        ord.algo = "ordinal-q".into();
        let mut num = base;
        num.algo = "q".into();
        let ratios = time_ratios(&[ord, num]);
        assert_eq!(ratios.len(), 1);
        assert_eq!(ratios[0].ratio, 1.0);
    }

    #[test]
    fn aggregate_across_seeds() {
        let records = vec![record(0, 1, 10.0), record(1, 1, 20.0), record(0, 2, 200.0), record(1, 2, 0.0)];
        let rows = aggregate(&records).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].score_mean, 15.0);
        assert_eq!(rows[0].score_std, 5.0);
        assert_eq!(rows[0].greedy_mean, None);
        assert_eq!(rows[1].win_rate, 0.5);
        assert_eq!(rows[1].greedy_mean, Some(101.0));
        assert!(aggregate(&[]).is_err());
    }
}
