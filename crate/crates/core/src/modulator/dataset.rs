//! Ingestion of irradiation/recovery measurement series.
//!
//! Files are UTF-8 CSV with the header
//! `sample_id,phase,step_index,injected_power_uW,exposure_s,insertion_loss_dB`.
//! Lines starting with `#` are comments, except `#@record key=value …`
//! lines, which carry per-sample summary data (half-wave voltages, maximum
//! loss, extinction ratios, dark recovery).
//!
//! Replicate runs of a sample use the id `<sample>/r<n>`.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::modulator::{ModulatorKind, ModulatorRecord};
use crate::primitives::Decibel;

pub const HEADER: [&str; 6] = [
    "sample_id",
    "phase",
    "step_index",
    "injected_power_uW",
    "exposure_s",
    "insertion_loss_dB",
];

const RECORD_DIRECTIVE: &str = "#@record";

/// Measurement data shipped with the crate.
pub const BUNDLED_CSV: &str = include_str!("../../data/modulator_measurements.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Alteration,
    Recovery,
}

impl FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "alteration" => Ok(Phase::Alteration),
            "recovery" => Ok(Phase::Recovery),
            other => Err(format!(
                "unknown phase {other:?} (expected alteration or recovery)"
            )),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Alteration => "alteration",
            Phase::Recovery => "recovery",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub step_index: usize,
    pub injected_power_uw: f64,
    pub exposure_s: f64,
    pub insertion_loss: Decibel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrradiationSeries {
    pub sample_id: String,
    pub phase: Phase,
    pub steps: Vec<Step>,
}

impl IrradiationSeries {
    /// Sample id with any `/r<n>` replicate suffix removed.
    pub fn base_sample(&self) -> &str {
        base_sample(&self.sample_id)
    }

    pub fn is_replicate(&self) -> bool {
        self.base_sample() != self.sample_id
    }

    pub fn last(&self) -> &Step {
        self.steps.last().expect("series are never empty")
    }

    /// Elapsed time at the end of each step.
    pub fn cumulative_time_s(&self) -> Vec<f64> {
        self.steps
            .iter()
            .scan(0.0, |t, s| {
                *t += s.exposure_s;
                Some(*t)
            })
            .collect()
    }
}

pub fn base_sample(id: &str) -> &str {
    match id.rsplit_once("/r") {
        Some((base, n)) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => base,
        _ => id,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    Schema,
    Value,
    Monotonicity,
}

/// One problem found while ingesting, with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestIssue {
    pub line: u64,
    pub kind: IssueKind,
    pub message: String,
}

impl fmt::Display for IngestIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            IssueKind::Schema => "schema error",
            IssueKind::Value => "value error",
            IssueKind::Monotonicity => "monotonicity error",
        };
        write!(f, "line {}: {kind}: {}", self.line, self.message)
    }
}

/// Series plus any `#@record` summaries found in the same file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub series: Vec<IrradiationSeries>,
    pub records: Vec<ModulatorRecord>,
}

impl Dataset {
    /// The measurement set shipped with the crate.
    pub fn bundled() -> Dataset {
        ingest_dataset(BUNDLED_CSV.as_bytes()).expect("bundled dataset is valid")
    }

    pub fn record(&self, id: &str) -> Option<&ModulatorRecord> {
        let base = base_sample(id);
        self.records.iter().find(|r| r.id == base)
    }

    pub fn series(&self, id: &str, phase: Phase) -> Option<&IrradiationSeries> {
        self.series
            .iter()
            .find(|s| s.sample_id == id && s.phase == phase)
    }

    /// Kind from the sample's record if present, else from its label.
    pub fn kind_of(&self, id: &str) -> ModulatorKind {
        self.record(id)
            .map(|r| r.kind)
            .unwrap_or_else(|| ModulatorKind::from_label(id))
    }
}

/// Parses measurement series only.
pub fn ingest_series<R: Read>(reader: R) -> Result<Vec<IrradiationSeries>> {
    ingest_dataset(reader).map(|d| d.series)
}

/// Parses series and summary records, collecting every issue before
/// failing.
pub fn ingest_dataset<R: Read>(mut reader: R) -> Result<Dataset> {
    let mut text = String::new();
    if let Err(e) = reader.read_to_string(&mut text) {
        return Err(Error::Ingest(vec![IngestIssue {
            line: 0,
            kind: IssueKind::Schema,
            message: format!("unreadable input: {e}"),
        }]));
    }

    let mut issues = Vec::new();
    let records = parse_records(&text, &mut issues);
    let series = parse_rows(&text, &mut issues);

    if issues.is_empty() {
        Ok(Dataset { series, records })
    } else {
        issues.sort_by_key(|i| i.line);
        Err(Error::Ingest(issues))
    }
}

fn parse_records(text: &str, issues: &mut Vec<IngestIssue>) -> Vec<ModulatorRecord> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let Some(rest) = line.trim_start().strip_prefix(RECORD_DIRECTIVE) else {
            continue;
        };
        let line_no = idx as u64 + 1;
        match parse_record(rest) {
            Ok(r) => records.push(r),
            Err(message) => issues.push(IngestIssue {
                line: line_no,
                kind: IssueKind::Schema,
                message,
            }),
        }
    }
    records
}

fn parse_record(body: &str) -> std::result::Result<ModulatorRecord, String> {
    let mut fields = HashMap::new();
    for token in body.split_whitespace() {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| format!("record token {token:?} is not key=value"))?;
        fields.insert(k, v);
    }
    let text = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| format!("record missing {k}"))
    };
    let num = |k: &str| -> std::result::Result<f64, String> {
        text(k)?
            .parse::<f64>()
            .map_err(|_| format!("record field {k} is not a number"))
    };
    let opt_db = |k: &str| -> std::result::Result<Option<Decibel>, String> {
        match fields.get(k) {
            None => Ok(None),
            Some(_) => Decibel::new(num(k)?).map(Some).map_err(|e| e.to_string()),
        }
    };
    let record = ModulatorRecord {
        id: text("id")?.to_string(),
        kind: text("kind")?.parse()?,
        vpi_before: num("vpi_before")?,
        vpi_after: num("vpi_after")?,
        vpi_recovered: num("vpi_recovered")?,
        max_delta_loss: Decibel::new(num("max_delta_loss_db")?).map_err(|e| e.to_string())?,
        extinction_before: opt_db("extinction_before_db")?,
        extinction_after: opt_db("extinction_after_db")?,
        natural_recovery_3day: opt_db("natural_recovery_3day_db")?,
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

struct Row {
    line: u64,
    sample_id: String,
    phase: Phase,
    step: Step,
}

fn parse_rows(text: &str, issues: &mut Vec<IngestIssue>) -> Vec<IrradiationSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header_line = text
        .lines()
        .position(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .map(|p| p as u64 + 1)
        .unwrap_or(1);
    match rdr.headers() {
        Ok(h) if h.iter().eq(HEADER.iter().copied()) => {}
        Ok(h) if h.is_empty() => {
            issues.push(schema(header_line, "missing header (empty input)".into()));
            return Vec::new();
        }
        Ok(h) => {
            issues.push(schema(
                header_line,
                format!(
                    "bad header {:?}, expected {}",
                    h.iter().collect::<Vec<_>>(),
                    HEADER.join(",")
                ),
            ));
            return Vec::new();
        }
        Err(e) => {
            issues.push(schema(header_line, format!("unreadable header: {e}")));
            return Vec::new();
        }
    }

    let mut rows = Vec::new();
    for result in rdr.records() {
        let rec = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                issues.push(schema(line, e.to_string()));
                continue;
            }
        };
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        match parse_row(&rec, line) {
            Ok(row) => rows.push(row),
            Err(issue) => issues.push(issue),
        }
    }
    group_rows(rows, issues)
}

fn schema(line: u64, message: String) -> IngestIssue {
    IngestIssue {
        line,
        kind: IssueKind::Schema,
        message,
    }
}

fn parse_row(rec: &csv::StringRecord, line: u64) -> std::result::Result<Row, IngestIssue> {
    if rec.len() != HEADER.len() {
        return Err(schema(
            line,
            format!("expected {} columns, found {}", HEADER.len(), rec.len()),
        ));
    }
    let value = |message: String| IngestIssue {
        line,
        kind: IssueKind::Value,
        message,
    };
    let sample_id = rec[0].to_string();
    if sample_id.is_empty() {
        return Err(value("empty sample_id".into()));
    }
    let phase: Phase = rec[1].parse().map_err(|m| schema(line, m))?;
    let step_index: usize = rec[2].parse().map_err(|_| {
        value(format!(
            "step_index {:?} is not a non-negative integer",
            &rec[2]
        ))
    })?;
    let number = |col: usize| -> std::result::Result<f64, IngestIssue> {
        let v: f64 = rec[col]
            .parse()
            .map_err(|_| value(format!("{} {:?} is not a number", HEADER[col], &rec[col])))?;
        if !v.is_finite() {
            return Err(value(format!("{} must be finite", HEADER[col])));
        }
        if v < 0.0 {
            return Err(value(format!("{} is negative ({v})", HEADER[col])));
        }
        Ok(v)
    };
    let injected_power_uw = number(3)?;
    let exposure_s = number(4)?;
    let loss = number(5)?;
    Ok(Row {
        line,
        sample_id,
        phase,
        step: Step {
            step_index,
            injected_power_uw,
            exposure_s,
            insertion_loss: Decibel::new(loss).expect("checked finite"),
        },
    })
}

fn group_rows(rows: Vec<Row>, issues: &mut Vec<IngestIssue>) -> Vec<IrradiationSeries> {
    let mut order: Vec<(String, Phase)> = Vec::new();
    let mut groups: HashMap<(String, Phase), Vec<Row>> = HashMap::new();
    for row in rows {
        let key = (row.sample_id.clone(), row.phase);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(row);
    }

    let mut out = Vec::with_capacity(order.len());
    for key in order {
        let rows = groups.remove(&key).expect("key recorded");
        let (sample_id, phase) = key;
        let mut prev: Option<&Row> = None;
        for row in &rows {
            match prev {
                None if row.step.step_index != 0 => issues.push(IngestIssue {
                    line: row.line,
                    kind: IssueKind::Schema,
                    message: format!("{sample_id} {phase}: first step_index must be 0"),
                }),
                Some(p) if row.step.step_index <= p.step.step_index => issues.push(IngestIssue {
                    line: row.line,
                    kind: IssueKind::Schema,
                    message: format!(
                        "{sample_id} {phase}: step_index {} does not follow {}",
                        row.step.step_index, p.step.step_index
                    ),
                }),
                Some(p)
                    if phase == Phase::Alteration
                        && row.step.injected_power_uw < p.step.injected_power_uw =>
                {
                    issues.push(IngestIssue {
                        line: row.line,
                        kind: IssueKind::Monotonicity,
                        message: format!(
                            "{sample_id}: injected power drops from {} to {} uW",
                            p.step.injected_power_uw, row.step.injected_power_uw
                        ),
                    })
                }
                _ => {}
            }
            prev = Some(row);
        }
        out.push(IrradiationSeries {
            sample_id,
            phase,
            steps: rows.into_iter().map(|r| r.step).collect(),
        });
    }
    out
}

/// Largest pointwise disagreement between a replicate and its primary run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateCheck {
    pub replicate_id: String,
    pub primary_id: String,
    pub max_deviation: Decibel,
    pub tolerance: Decibel,
}

impl ReplicateCheck {
    pub fn within_tolerance(&self) -> bool {
        self.max_deviation.value() <= self.tolerance.value()
    }
}

/// Compares every replicate alteration/recovery series against the primary
/// run of the same sample, matching steps by index.
pub fn check_replicates(dataset: &Dataset) -> Vec<ReplicateCheck> {
    dataset
        .series
        .iter()
        .filter(|s| s.is_replicate())
        .filter_map(|rep| {
            let primary = dataset.series(rep.base_sample(), rep.phase)?;
            let by_index: HashMap<usize, f64> = primary
                .steps
                .iter()
                .map(|s| (s.step_index, s.insertion_loss.value()))
                .collect();
            let max_dev = rep
                .steps
                .iter()
                .filter_map(|s| {
                    by_index
                        .get(&s.step_index)
                        .map(|p| (s.insertion_loss.value() - p).abs())
                })
                .fold(0.0, f64::max);
            Some(ReplicateCheck {
                replicate_id: rep.sample_id.clone(),
                primary_id: primary.sample_id.clone(),
                max_deviation: Decibel::new(max_dev).expect("finite"),
                tolerance: dataset.kind_of(&rep.sample_id).replicate_tolerance(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str =
        "sample_id,phase,step_index,injected_power_uW,exposure_s,insertion_loss_dB\n";

    fn issues(err: Error) -> Vec<IngestIssue> {
        match err {
            Error::Ingest(v) => v,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ten_step_series() {
        let mut csv = String::from(HEAD);
        for i in 0..10 {
            csv += &format!(
                "PM-5,alteration,{i},{},300,{}\n",
                (i + 1) * 200,
                i as f64 * 2.0
            );
        }
        let series = ingest_series(csv.as_bytes()).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].steps.len(), 10);
        assert_eq!(series[0].phase, Phase::Alteration);
    }

    #[test]
    fn negative_loss_is_named_by_line() {
        let csv = format!(
            "# comment\n{HEAD}PM-1,alteration,0,200,300,0.5\nPM-1,alteration,1,400,300,-0.2\n"
        );
        let found = issues(ingest_series(csv.as_bytes()).unwrap_err());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].line, 4);
        assert_eq!(found[0].kind, IssueKind::Value);
        assert!(found[0].to_string().contains("line 4"));
    }

    #[test]
    fn itemizes_multiple_problems() {
        let csv = format!(
            "{HEAD}PM-1,alteration,0,400,300,0.5\nPM-1,alteration,1,200,300,0.6\nPM-1,alteration,1,600,300,0.7\nPM-2,sideways,0,1,1,1\nPM-3,recovery,0,50,30\n"
        );
        let found = issues(ingest_series(csv.as_bytes()).unwrap_err());
        let kinds: Vec<_> = found.iter().map(|i| (i.line, i.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (3, IssueKind::Monotonicity),
                (4, IssueKind::Schema),
                (5, IssueKind::Schema),
                (6, IssueKind::Schema),
            ]
        );
    }

    #[test]
    fn first_step_must_be_zero() {
        let csv = format!("{HEAD}PM-1,recovery,3,50,30,0.5\n");
        let found = issues(ingest_series(csv.as_bytes()).unwrap_err());
        assert_eq!(found[0].kind, IssueKind::Schema);
    }

    #[test]
    fn recovery_power_may_vary() {
        let csv = format!("{HEAD}PM-1,recovery,0,50,30,0.5\nPM-1,recovery,1,20,30,0.4\n");
        assert!(ingest_series(csv.as_bytes()).is_ok());
    }

    #[test]
    fn empty_and_bad_header() {
        let found = issues(ingest_series("".as_bytes()).unwrap_err());
        assert_eq!(found[0].kind, IssueKind::Schema);
        let found = issues(ingest_series("a,b,c\n1,2,3\n".as_bytes()).unwrap_err());
        assert_eq!((found[0].line, found[0].kind), (1, IssueKind::Schema));
    }

    #[test]
    fn bad_record_directive() {
        let csv = format!("#@record id=PM-9 kind=phase vpi_before=x\n{HEAD}");
        let found = issues(ingest_dataset(csv.as_bytes()).unwrap_err());
        assert_eq!(found[0].line, 1);
    }

    #[test]
    fn bundled_dataset_matches_measured_endpoints() {
        let data = Dataset::bundled();
        let expected = [
            ("PM-1", 7.19),
            ("PM-2", 0.75),
            ("PM-3", 0.91),
            ("PM-4", 0.50),
            ("PM-5", 19.53),
            ("IM-1", 0.39),
            ("IM-2", 1.31),
        ];
        for (id, loss) in expected {
            let s = data.series(id, Phase::Alteration).unwrap();
            assert_eq!(s.last().insertion_loss.value(), loss, "{id}");
            assert_eq!(data.record(id).unwrap().max_delta_loss.value(), loss);
            assert!(data.series(id, Phase::Recovery).is_some());
        }
        let pm5 = data.series("PM-5", Phase::Alteration).unwrap();
        assert_eq!(pm5.last().injected_power_uw, 2000.0);
        assert_eq!(
            data.series("PM-4", Phase::Alteration)
                .unwrap()
                .last()
                .injected_power_uw,
            8000.0
        );
        assert_eq!(data.records.len(), 7);
        for r in &data.records {
            assert!(r.vpi_after >= r.vpi_before, "{}", r.id);
        }
    }

    #[test]
    fn bundled_replicates_within_stability() {
        let data = Dataset::bundled();
        let checks = check_replicates(&data);
        assert_eq!(checks.len(), 6);
        assert!(checks.iter().all(ReplicateCheck::within_tolerance));
    }

    #[test]
    fn diverging_replicate_flagged() {
        let csv = format!(
            "{HEAD}PM-5,alteration,0,200,300,1.0\nPM-5,alteration,1,400,300,2.0\nPM-5/r2,alteration,0,200,300,1.0\nPM-5/r2,alteration,1,400,300,2.5\n"
        );
        let data = ingest_dataset(csv.as_bytes()).unwrap();
        let checks = check_replicates(&data);
        assert_eq!(checks.len(), 1);
        assert!(!checks[0].within_tolerance());
        assert!((checks[0].max_deviation.value() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn replicate_suffix() {
        assert_eq!(base_sample("PM-5/r2"), "PM-5");
        assert_eq!(base_sample("PM-5"), "PM-5");
        assert_eq!(base_sample("odd/rx"), "odd/rx");
    }
}
