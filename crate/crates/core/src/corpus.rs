//! Clickbait Challenge corpus: JSONL parsing, merge, split and EDA tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Weekday};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Twitter `created_at` layout, e.g. `Thu Mar 02 10:00:00 +0000 2017`.
pub const TWITTER_TIMESTAMP_FORMAT: &str = "%a %b %d %H:%M:%S %z %Y";

pub const DEFAULT_SPLIT_SEED: u64 = 1;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.67;

/// One row of `instances.jsonl`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Instance {
    pub id: String,
    pub post_text: Vec<String>,
    pub post_timestamp: String,
    pub post_media: Vec<String>,
    pub target_title: String,
    pub target_description: String,
    pub target_keywords: String,
    pub target_paragraphs: Vec<String>,
    pub target_captions: Vec<String>,
}

impl Instance {
    /// The post as a single string: the `postText` array joined by single spaces.
    pub fn post(&self) -> String {
        self.post_text.join(" ")
    }

    pub fn keyword_count(&self) -> usize {
        self.target_keywords
            .split(',')
            .filter(|k| !k.trim().is_empty())
            .count()
    }

    /// Weekday of `postTimestamp`, taken in the timestamp's own offset.
    pub fn weekday(&self) -> Option<Weekday> {
        DateTime::parse_from_str(self.post_timestamp.trim(), TWITTER_TIMESTAMP_FORMAT)
            .ok()
            .map(|t| t.weekday())
    }
}

/// One row of `truth.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TruthRecord {
    pub id: String,
    pub truth_judgments: Vec<f64>,
    pub truth_mean: f64,
    pub truth_median: f64,
    pub truth_mode: f64,
    pub truth_class: TruthClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TruthClass {
    #[serde(rename = "clickbait")]
    Clickbait,
    #[serde(rename = "no-clickbait")]
    NoClickbait,
}

impl TruthClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TruthClass::Clickbait => "clickbait",
            TruthClass::NoClickbait => "no-clickbait",
        }
    }

    /// Label encoding: 1 for clickbait, 0 otherwise.
    pub fn label(self) -> u8 {
        match self {
            TruthClass::Clickbait => 1,
            TruthClass::NoClickbait => 0,
        }
    }
}

impl FromStr for TruthClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clickbait" => Ok(TruthClass::Clickbait),
            "no-clickbait" => Ok(TruthClass::NoClickbait),
            other => Err(Error::invalid(format!("unknown truthClass {other:?}"))),
        }
    }
}

/// Allowed crowd ratings.
pub const JUDGMENT_SCALE: [f64; 4] = [0.0, 0.33, 0.66, 1.0];

impl TruthRecord {
    /// Describes every way the record disagrees with its own judgments.
    /// Empty when the record is self-consistent.
    pub fn inconsistencies(&self) -> Vec<String> {
        let mut out = Vec::new();
        for &j in &self.truth_judgments {
            if !JUDGMENT_SCALE.iter().any(|s| (j - s).abs() <= 0.01) {
                out.push(format!("judgment {j} off the rating scale"));
            }
        }
        match recompute_truth_stats(&self.truth_judgments) {
            Ok(stats) => {
                if (stats.mean - self.truth_mean).abs() > 1e-6 {
                    out.push(format!("truthMean {} != {}", self.truth_mean, stats.mean));
                }
                if (stats.median - self.truth_median).abs() > 1e-6 {
                    out.push(format!(
                        "truthMedian {} != {}",
                        self.truth_median, stats.median
                    ));
                }
            }
            Err(_) => out.push("empty truthJudgments".to_string()),
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub instance: Instance,
    pub truth: TruthRecord,
    pub label: u8,
}

impl LabeledInstance {
    pub fn new(instance: Instance, truth: TruthRecord) -> Self {
        let label = truth.truth_class.label();
        LabeledInstance {
            instance,
            truth,
            label,
        }
    }

    pub fn id(&self) -> &str {
        &self.instance.id
    }

    /// Non-empty post text and non-empty target title.
    pub fn has_valid_text(&self) -> bool {
        self.instance.post_text.iter().any(|s| !s.trim().is_empty())
            && !self.instance.target_title.trim().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthStats {
    pub mean: f64,
    pub median: f64,
    pub mode: f64,
}

/// Mean, median (average of the two middles for even length) and mode
/// (smallest value among the most frequent).
pub fn recompute_truth_stats(judgments: &[f64]) -> Result<TruthStats> {
    if judgments.is_empty() {
        return Err(Error::invalid("truth statistics of an empty judgment list"));
    }
    let n = judgments.len();
    let mean = judgments.iter().sum::<f64>() / n as f64;

    let mut sorted = judgments.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };

    // Runs in the sorted list; strict `>` keeps the first, i.e. smallest, on ties.
    let mut mode = sorted[0];
    let mut best = 0usize;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best {
            best = j - i;
            mode = sorted[i];
        }
        i = j;
    }
    Ok(TruthStats { mean, median, mode })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Skip malformed lines instead of failing on the first one.
    pub lenient: bool,
}

#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    /// `(line number, reason)` for each skipped line (lenient mode only).
    pub skipped: Vec<(usize, String)>,
}

fn parse_jsonl<T, F>(path: &Path, opts: ParseOptions, check: F) -> Result<Parsed<T>>
where
    T: DeserializeOwned,
    F: Fn(&T) -> Option<String>,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl_reader(BufReader::new(file), path, opts, check)
}

fn parse_jsonl_reader<R, T, F>(
    reader: R,
    path: &Path,
    opts: ParseOptions,
    check: F,
) -> Result<Parsed<T>>
where
    R: BufRead,
    T: DeserializeOwned,
    F: Fn(&T) -> Option<String>,
{
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let outcome = serde_json::from_str::<T>(&line)
            .map_err(|e| e.to_string())
            .and_then(|rec| match check(&rec) {
                Some(msg) => Err(msg),
                None => Ok(rec),
            });
        match outcome {
            Ok(rec) => records.push(rec),
            Err(message) if opts.lenient => skipped.push((lineno, message)),
            Err(message) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    message,
                })
            }
        }
    }
    Ok(Parsed { records, skipped })
}

fn check_instance(inst: &Instance) -> Option<String> {
    inst.id.is_empty().then(|| "empty id".to_string())
}

fn check_truth(t: &TruthRecord) -> Option<String> {
    if t.id.is_empty() {
        Some("empty id".to_string())
    } else if t.truth_judgments.is_empty() {
        Some("empty truthJudgments".to_string())
    } else {
        None
    }
}

pub fn parse_instances(path: impl AsRef<Path>, opts: ParseOptions) -> Result<Parsed<Instance>> {
    parse_jsonl(path.as_ref(), opts, check_instance)
}

pub fn parse_truth(path: impl AsRef<Path>, opts: ParseOptions) -> Result<Parsed<TruthRecord>> {
    parse_jsonl(path.as_ref(), opts, check_truth)
}

/// Parses instances from any reader; `origin` is only used in error messages.
pub fn parse_instances_from<R: Read>(
    reader: R,
    origin: &Path,
    opts: ParseOptions,
) -> Result<Parsed<Instance>> {
    parse_jsonl_reader(BufReader::new(reader), origin, opts, check_instance)
}

pub fn parse_truth_from<R: Read>(
    reader: R,
    origin: &Path,
    opts: ParseOptions,
) -> Result<Parsed<TruthRecord>> {
    parse_jsonl_reader(BufReader::new(reader), origin, opts, check_truth)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeReport {
    pub unmatched_instances: usize,
    pub unmatched_truths: usize,
}

/// Inner join on `id`, in `instances` order.
pub fn merge_corpus(
    instances: Vec<Instance>,
    truths: Vec<TruthRecord>,
) -> Result<(Vec<LabeledInstance>, MergeReport)> {
    let mut seen = HashSet::with_capacity(instances.len());
    for inst in &instances {
        if !seen.insert(inst.id.as_str()) {
            return Err(Error::DuplicateId {
                id: inst.id.clone(),
                what: "instances",
            });
        }
    }
    let mut by_id: HashMap<String, TruthRecord> = HashMap::with_capacity(truths.len());
    for t in truths {
        if by_id.contains_key(&t.id) {
            return Err(Error::DuplicateId {
                id: t.id,
                what: "truth",
            });
        }
        by_id.insert(t.id.clone(), t);
    }

    let mut merged = Vec::with_capacity(instances.len().min(by_id.len()));
    let mut report = MergeReport::default();
    for inst in instances {
        match by_id.remove(&inst.id) {
            Some(truth) => merged.push(LabeledInstance::new(inst, truth)),
            None => report.unmatched_instances += 1,
        }
    }
    report.unmatched_truths = by_id.len();
    Ok((merged, report))
}

/// Seeded uniform shuffle; the first `floor(n * train_fraction)` rows train.
pub fn split_train_test<T: Clone>(
    data: &[T],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    let (train_idx, test_idx) = split_indices(data.len(), train_fraction, seed)?;
    Ok((
        train_idx.iter().map(|&i| data[i].clone()).collect(),
        test_idx.iter().map(|&i| data[i].clone()).collect(),
    ))
}

/// Index form of [`split_train_test`].
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::invalid("cannot split an empty data set"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (n as f64 * train_fraction).floor() as usize;
    let test = order.split_off(n_train);
    Ok((order, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Grouper {
    ImageCount,
    Weekday,
    KeywordCount,
    CaptionCount,
}

/// Largest count shown in the keyword and caption tables.
pub const EDA_COUNT_CAP: usize = 10;

impl FromStr for Grouper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "images" | "imageCount" => Ok(Grouper::ImageCount),
            "weekday" => Ok(Grouper::Weekday),
            "keywords" | "keywordCount" => Ok(Grouper::KeywordCount),
            "captions" | "captionCount" => Ok(Grouper::CaptionCount),
            other => Err(Error::invalid(format!("unknown EDA grouping {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupKey {
    Count(usize),
    Label(String),
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKey::Count(n) => write!(f, "{n}"),
            GroupKey::Label(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EdaRow {
    pub group_key: GroupKey,
    pub clickbait_count: usize,
    pub non_clickbait_count: usize,
    pub clickbait_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdaTable {
    pub rows: Vec<EdaRow>,
    /// Rows whose timestamp did not parse (weekday grouping only).
    pub unknown: usize,
    /// Rows outside the 0..=10 range (keyword and caption groupings).
    pub beyond_cap: usize,
}

pub const UNKNOWN_GROUP: &str = "unknown";

const WEEKDAYS: [Weekday; 7] = [
    Weekday::Mon,
    Weekday::Tue,
    Weekday::Wed,
    Weekday::Thu,
    Weekday::Fri,
    Weekday::Sat,
    Weekday::Sun,
];

fn weekday_name(d: Weekday) -> &'static str {
    match d {
        Weekday::Mon => "Monday",
        Weekday::Tue => "Tuesday",
        Weekday::Wed => "Wednesday",
        Weekday::Thu => "Thursday",
        Weekday::Fri => "Friday",
        Weekday::Sat => "Saturday",
        Weekday::Sun => "Sunday",
    }
}

pub fn eda_group_table(data: &[LabeledInstance], grouper: Grouper) -> EdaTable {
    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut unknown_counts = (0usize, 0usize);
    let mut table = EdaTable::default();

    let bump = |slot: &mut (usize, usize), label: u8| {
        if label == 1 {
            slot.0 += 1;
        } else {
            slot.1 += 1;
        }
    };

    for row in data {
        let inst = &row.instance;
        let key = match grouper {
            Grouper::ImageCount => Some(inst.post_media.len()),
            Grouper::KeywordCount => Some(inst.keyword_count()),
            Grouper::CaptionCount => Some(inst.target_captions.len()),
            Grouper::Weekday => inst.weekday().map(|d| d.num_days_from_monday() as usize),
        };
        match key {
            None => {
                table.unknown += 1;
                bump(&mut unknown_counts, row.label);
            }
            Some(k)
                if k > EDA_COUNT_CAP
                    && matches!(grouper, Grouper::KeywordCount | Grouper::CaptionCount) =>
            {
                table.beyond_cap += 1;
            }
            Some(k) => bump(counts.entry(k).or_default(), row.label),
        }
    }

    for (k, (cb, ncb)) in counts {
        let group_key = match grouper {
            Grouper::Weekday => GroupKey::Label(weekday_name(WEEKDAYS[k]).to_string()),
            _ => GroupKey::Count(k),
        };
        table.rows.push(eda_row(group_key, cb, ncb));
    }
    if unknown_counts.0 + unknown_counts.1 > 0 {
        table.rows.push(eda_row(
            GroupKey::Label(UNKNOWN_GROUP.to_string()),
            unknown_counts.0,
            unknown_counts.1,
        ));
    }
    table
}

fn eda_row(group_key: GroupKey, cb: usize, ncb: usize) -> EdaRow {
    EdaRow {
        group_key,
        clickbait_count: cb,
        non_clickbait_count: ncb,
        clickbait_pct: 100.0 * cb as f64 / (cb + ncb) as f64,
    }
}

pub fn write_eda_csv<W: Write>(rows: &[EdaRow], group_header: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([group_header, "clickbait", "no-clickbait", "%-clickbait"])?;
    for r in rows {
        w.write_record([
            r.group_key.to_string(),
            r.clickbait_count.to_string(),
            r.non_clickbait_count.to_string(),
            format!("{:.2}%", r.clickbait_pct),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<eda csv>", e))?;
    Ok(())
}

/// Column order of the merged-corpus CSV. List-valued fields are stored as
/// JSON arrays inside their cell.
pub const CORPUS_CSV_HEADER: [&str; 15] = [
    "id",
    "label",
    "truthClass",
    "truthMean",
    "truthMedian",
    "truthMode",
    "truthJudgments",
    "postText",
    "postTimestamp",
    "postMedia",
    "targetTitle",
    "targetDescription",
    "targetKeywords",
    "targetParagraphs",
    "targetCaptions",
];

pub fn write_corpus_csv<W: Write>(data: &[LabeledInstance], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CORPUS_CSV_HEADER)?;
    for row in data {
        let i = &row.instance;
        let t = &row.truth;
        w.write_record([
            i.id.clone(),
            row.label.to_string(),
            t.truth_class.as_str().to_string(),
            t.truth_mean.to_string(),
            t.truth_median.to_string(),
            t.truth_mode.to_string(),
            serde_json::to_string(&t.truth_judgments)?,
            serde_json::to_string(&i.post_text)?,
            i.post_timestamp.clone(),
            serde_json::to_string(&i.post_media)?,
            i.target_title.clone(),
            i.target_description.clone(),
            i.target_keywords.clone(),
            serde_json::to_string(&i.target_paragraphs)?,
            serde_json::to_string(&i.target_captions)?,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<corpus csv>", e))?;
    Ok(())
}

pub fn read_corpus_csv<R: Read>(input: R) -> Result<Vec<LabeledInstance>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(CORPUS_CSV_HEADER.iter().copied()) {
        return Err(Error::invalid(format!(
            "unexpected corpus CSV header: {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for (idx, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = idx + 2;
        let bad = |field: &str, e: &dyn fmt::Display| Error::Parse {
            path: "<corpus csv>".into(),
            line,
            message: format!("{field}: {e}"),
        };
        let num = |k: usize| rec[k].parse::<f64>().map_err(|e| bad(CORPUS_CSV_HEADER[k], &e));
        let list = |k: usize| {
            serde_json::from_str::<Vec<String>>(&rec[k]).map_err(|e| bad(CORPUS_CSV_HEADER[k], &e))
        };
        let instance = Instance {
            id: rec[0].to_string(),
            post_text: list(7)?,
            post_timestamp: rec[8].to_string(),
            post_media: list(9)?,
            target_title: rec[10].to_string(),
            target_description: rec[11].to_string(),
            target_keywords: rec[12].to_string(),
            target_paragraphs: list(13)?,
            target_captions: list(14)?,
        };
        let truth = TruthRecord {
            id: rec[0].to_string(),
            truth_judgments: serde_json::from_str(&rec[6]).map_err(|e| bad("truthJudgments", &e))?,
            truth_mean: num(3)?,
            truth_median: num(4)?,
            truth_mode: num(5)?,
            truth_class: rec[2].parse().map_err(|e| bad("truthClass", &e))?,
        };
        out.push(LabeledInstance::new(instance, truth));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(id: &str, class: TruthClass) -> TruthRecord {
        TruthRecord {
            id: id.into(),
            truth_judgments: vec![0.0; 5],
            truth_mean: 0.0,
            truth_median: 0.0,
            truth_mode: 0.0,
            truth_class: class,
        }
    }

    fn inst(id: &str) -> Instance {
        Instance {
            id: id.into(),
            ..Default::default()
        }
    }

    fn parse_str_instances(s: &str, lenient: bool) -> Result<Parsed<Instance>> {
        parse_instances_from(s.as_bytes(), Path::new("mem"), ParseOptions { lenient })
    }

    #[test]
    fn instance_fields_map_directly() {
        let line = r#"{"id":"1","postText":["hello"],"postTimestamp":"Thu Mar 02 10:00:00 +0000 2017","postMedia":["media/a.jpg"],"targetTitle":"t","targetDescription":"d","targetKeywords":"a,b","targetParagraphs":["p1","p2"],"targetCaptions":["c"]}"#;
        let parsed = parse_str_instances(line, false).unwrap();
        let i = &parsed.records[0];
        assert_eq!(i.post_text, vec!["hello"]);
        assert_eq!(i.post_media.len(), 1);
        assert_eq!(i.target_paragraphs.len(), 2);
        assert_eq!(i.keyword_count(), 2);
        assert_eq!(i.weekday(), Some(Weekday::Thu));
    }

    #[test]
    fn missing_lists_become_empty() {
        let parsed = parse_str_instances(r#"{"id":"9","postText":["x"]}"#, false).unwrap();
        assert!(parsed.records[0].post_media.is_empty());
        assert!(parsed.records[0].target_captions.is_empty());
    }

    #[test]
    fn strict_mode_names_the_line() {
        let input = "{\"id\":\"1\"}\n{not json\n";
        match parse_str_instances(input, false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let lenient = parse_str_instances(input, true).unwrap();
        assert_eq!(lenient.records.len(), 1);
        assert_eq!(lenient.skipped.len(), 1);
        assert_eq!(lenient.skipped[0].0, 2);
    }

    #[test]
    fn truth_parse_and_label() {
        let line = r#"{"id":"1","truthJudgments":[0,0,0,0,0],"truthMean":0.0,"truthMedian":0.0,"truthMode":0.0,"truthClass":"no-clickbait"}"#;
        let parsed = parse_truth_from(line.as_bytes(), Path::new("mem"), ParseOptions::default())
            .unwrap();
        assert_eq!(parsed.records[0].truth_mean, 0.0);
        assert_eq!(parsed.records[0].truth_class.label(), 0);
        assert_eq!(TruthClass::Clickbait.label(), 1);
        assert!(parsed.records[0].inconsistencies().is_empty());

        let bad = r#"{"id":"1","truthJudgments":[0],"truthMean":0.0,"truthMedian":0.0,"truthMode":0.0,"truthClass":"maybe"}"#;
        assert!(parse_truth_from(bad.as_bytes(), Path::new("mem"), ParseOptions::default()).is_err());
    }

    #[test]
    fn truth_stats() {
        let s = recompute_truth_stats(&[0.0; 5]).unwrap();
        assert_eq!((s.mean, s.median, s.mode), (0.0, 0.0, 0.0));

        let s = recompute_truth_stats(&[0.0, 0.33, 0.66, 1.0, 1.0]).unwrap();
        assert!((s.mean - 0.598).abs() < 1e-12);
        assert_eq!(s.median, 0.66);
        assert_eq!(s.mode, 1.0);

        assert_eq!(recompute_truth_stats(&[0.0, 1.0]).unwrap().median, 0.5);
        // tie between 0.33 and 0.66 goes to the smaller value
        assert_eq!(recompute_truth_stats(&[0.66, 0.33]).unwrap().mode, 0.33);
        assert!(recompute_truth_stats(&[]).is_err());
    }

    #[test]
    fn merge_full_and_partial() {
        let (m, r) = merge_corpus(
            vec![inst("a"), inst("b"), inst("c")],
            vec![
                truth("c", TruthClass::Clickbait),
                truth("a", TruthClass::NoClickbait),
                truth("b", TruthClass::NoClickbait),
            ],
        )
        .unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.iter().map(|x| x.id()).collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!(m[2].label, 1);
        assert_eq!(r, MergeReport::default());

        let (m, r) =
            merge_corpus(vec![inst("a"), inst("b")], vec![truth("b", TruthClass::Clickbait)])
                .unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(r.unmatched_instances, 1);
        assert_eq!(r.unmatched_truths, 0);
    }

    #[test]
    fn merge_rejects_duplicates() {
        assert!(matches!(
            merge_corpus(vec![inst("a"), inst("a")], vec![]),
            Err(Error::DuplicateId { .. })
        ));
        assert!(matches!(
            merge_corpus(
                vec![inst("a")],
                vec![truth("a", TruthClass::Clickbait), truth("a", TruthClass::Clickbait)]
            ),
            Err(Error::DuplicateId { .. })
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (tr, te) = split_indices(21_997, 0.67, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (14_737, 7_260));

        let data: Vec<u32> = (0..4).collect();
        let (a, b) = split_train_test(&data, 0.5, 7).unwrap();
        assert_eq!((a.len(), b.len()), (2, 2));
        let (a2, b2) = split_train_test(&data, 0.5, 7).unwrap();
        assert_eq!((a, b), (a2, b2));

        assert!(split_indices(0, 0.5, 1).is_err());
        assert!(split_indices(5, 1.0, 1).is_err());
        assert!(split_indices(5, 0.0, 1).is_err());
    }

    #[test]
    fn eda_weekday_routes_bad_timestamps() {
        let mut a = inst("a");
        a.post_timestamp = "Mon Feb 27 08:00:00 +0000 2017".into();
        let mut b = inst("b");
        b.post_timestamp = "yesterday".into();
        let rows = vec![
            LabeledInstance::new(a, truth("a", TruthClass::Clickbait)),
            LabeledInstance::new(b, truth("b", TruthClass::NoClickbait)),
        ];
        let t = eda_group_table(&rows, Grouper::Weekday);
        assert_eq!(t.unknown, 1);
        assert_eq!(t.rows[0].group_key, GroupKey::Label("Monday".into()));
        assert_eq!(t.rows[0].clickbait_pct, 100.0);
        assert_eq!(t.rows[1].group_key, GroupKey::Label(UNKNOWN_GROUP.into()));
    }

    #[test]
    fn weekday_uses_own_offset() {
        // 23:30 on Sunday at -0500 is Monday in UTC
        let mut a = inst("a");
        a.post_timestamp = "Sun Mar 05 23:30:00 -0500 2017".into();
        assert_eq!(a.weekday(), Some(Weekday::Sun));
    }

    #[test]
    fn eda_caps_counts() {
        let mut a = inst("a");
        a.target_captions = vec!["c".into(); 11];
        let rows = vec![
            LabeledInstance::new(a, truth("a", TruthClass::Clickbait)),
            LabeledInstance::new(inst("b"), truth("b", TruthClass::Clickbait)),
        ];
        let t = eda_group_table(&rows, Grouper::CaptionCount);
        assert_eq!(t.beyond_cap, 1);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].group_key, GroupKey::Count(0));
    }

    #[test]
    fn corpus_csv_round_trip() {
        let mut a = inst("a");
        a.post_text = vec!["Hello, \"world\"".into(), "line\ntwo".into()];
        a.target_paragraphs = vec!["p".into()];
        let rows = vec![LabeledInstance::new(a, truth("a", TruthClass::Clickbait))];
        let mut buf = Vec::new();
        write_corpus_csv(&rows, &mut buf).unwrap();
        let back = read_corpus_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn eda_csv_format() {
        let mut buf = Vec::new();
        write_eda_csv(&[eda_row(GroupKey::Count(0), 2827, 7241)], "# images", &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "# images,clickbait,no-clickbait,%-clickbait\n0,2827,7241,28.08%\n");
    }
}
