//! Benchmark families of random target DFAs with sampled words, and a batch
//! runner producing one CSV row per learner run.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{random_dfa, text, CompleteDfa, Word};
use crate::learner::{learn, LearnerConfig};
use crate::teacher::{parse_samples, write_samples, SampleSet, SampleTeacher};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("manifest")]
    Manifest(#[from] csv::Error),
    #[error("invalid benchmark spec: {0}")]
    Spec(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_owned(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub target_sizes: Vec<usize>,
    pub alphabet_size: usize,
    pub num_automata: usize,
    pub sets_per_automaton: usize,
    pub strings_per_set: usize,
    pub string_length: usize,
    pub seed: u64,
}

impl BenchmarkSpec {
    /// Sizes 4..=23, 19 automata each, 5 sets of 20 strings of length 30.
    pub fn full() -> Self {
        BenchmarkSpec {
            target_sizes: (4..=23).collect(),
            alphabet_size: 2,
            num_automata: 19,
            sets_per_automaton: 5,
            strings_per_set: 20,
            string_length: 30,
            seed: 0,
        }
    }

    /// Sizes 4..=8, 5 automata each, 2 sets of 10 strings of length 10.
    pub fn desk() -> Self {
        BenchmarkSpec {
            target_sizes: (4..=8).collect(),
            alphabet_size: 2,
            num_automata: 5,
            sets_per_automaton: 2,
            strings_per_set: 10,
            string_length: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let positive = [self.alphabet_size, self.num_automata, self.sets_per_automaton, self.strings_per_set, self.string_length];
        if self.target_sizes.is_empty() || self.target_sizes.contains(&0) || positive.contains(&0) {
            return Err(BenchError::Spec("all counts and sizes must be positive".into()));
        }
        Ok(())
    }
}

/// One benchmark: a sample file drawn from a target automaton. Paths are
/// relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub benchmark: String,
    pub target_size: usize,
    pub target_file: PathBuf,
    pub samples_file: PathBuf,
}

pub const MANIFEST_FILE: &str = "manifest.csv";

fn derive_seed(parts: &[u64]) -> u64 {
    // splitmix64 over the parts
    parts.iter().fold(0x9E37_79B9_7F4A_7C15, |acc, &p| {
        let mut z = acc ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    })
}

/// Random strings and all their prefixes, labeled by `target`, in
/// length-lexicographic order without duplicates.
pub fn sample_words(target: &CompleteDfa, count: usize, length: usize, rng: &mut impl Rng) -> SampleSet {
    let mut words: Vec<Word> = Vec::new();
    for _ in 0..count {
        let w: Word = (0..length).map(|_| rng.gen_range(0..target.num_symbols())).collect();
        words.extend((0..=length).map(|l| w[..l].to_vec()));
    }
    words.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    words.dedup();
    let entries = words
        .into_iter()
        .map(|w| {
            let label = target.accepts(&w).expect("symbols drawn from the alphabet");
            (w, label)
        })
        .collect();
    SampleSet { alphabet_size: target.num_symbols(), entries }
}

/// Writes target automata, sample files and `manifest.csv` into `dir`.
pub fn generate(spec: &BenchmarkSpec, dir: &Path) -> Result<Vec<ManifestEntry>, BenchError> {
    spec.validate()?;
    let targets = dir.join("targets");
    let samples = dir.join("samples");
    fs::create_dir_all(&targets).map_err(io_err(&targets))?;
    fs::create_dir_all(&samples).map_err(io_err(&samples))?;
    let mut entries = Vec::new();
    for &size in &spec.target_sizes {
        for i in 0..spec.num_automata {
            let target = random_dfa(size, spec.alphabet_size, derive_seed(&[spec.seed, size as u64, i as u64]))
                .map_err(|e| BenchError::Spec(e.to_string()))?;
            let target_rel = PathBuf::from("targets").join(format!("s{size:02}_a{i:02}.dfa"));
            let path = dir.join(&target_rel);
            fs::write(&path, text::write(&target.to_three_nfa())).map_err(io_err(&path))?;
            for j in 0..spec.sets_per_automaton {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[spec.seed, size as u64, i as u64, j as u64, 1]));
                let set = sample_words(&target, spec.strings_per_set, spec.string_length, &mut rng);
                let name = format!("s{size:02}_a{i:02}_t{j}");
                let samples_rel = PathBuf::from("samples").join(format!("{name}.txt"));
                let path = dir.join(&samples_rel);
                fs::write(&path, write_samples(&set)).map_err(io_err(&path))?;
                entries.push(ManifestEntry { benchmark: name, target_size: size, target_file: target_rel.clone(), samples_file: samples_rel });
            }
        }
    }
    let manifest = dir.join(MANIFEST_FILE);
    let mut w = csv::Writer::from_path(&manifest)?;
    for e in &entries {
        w.serialize(e)?;
    }
    w.flush().map_err(io_err(&manifest))?;
    Ok(entries)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|e| e.map_err(BenchError::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Ok,
    Budget,
    Error,
}

/// One CSV row. Column order is fixed by field order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: String,
    pub target_size: usize,
    pub learned_size: Option<usize>,
    pub mem_q: u64,
    pub dontcare: u64,
    pub val_q: u64,
    pub unsat_rounds: u64,
    pub symbols: u64,
    pub time_ms: u64,
    pub backend: String,
    pub mode: String,
    pub seed: u64,
    pub outcome: Outcome,
}

pub const CSV_HEADER: &str = "benchmark,target_size,learned_size,mem_q,dontcare,val_q,unsat_rounds,symbols,time_ms,backend,mode,seed,outcome";

/// Learns from the benchmark's samples and reports the result.
pub fn run_one(entry: &ManifestEntry, base: &Path, config: &LearnerConfig, seed: u64) -> RunRecord {
    let started = Instant::now();
    let mut record = RunRecord {
        benchmark: entry.benchmark.clone(),
        target_size: entry.target_size,
        learned_size: None,
        mem_q: 0,
        dontcare: 0,
        val_q: 0,
        unsat_rounds: 0,
        symbols: 0,
        time_ms: 0,
        backend: config.backend.name().into(),
        mode: config.mode_name().into(),
        seed,
        outcome: Outcome::Error,
    };
    let teacher = fs::read_to_string(base.join(&entry.samples_file))
        .ok()
        .and_then(|text| parse_samples(&text).ok())
        .and_then(|set| SampleTeacher::new(&set).ok());
    let Some(teacher) = teacher else {
        record.time_ms = started.elapsed().as_millis() as u64;
        return record;
    };
    let result = learn(teacher, config.clone());
    let stats = match &result {
        Ok(out) => {
            record.learned_size = Some(out.hypothesis.num_states());
            record.outcome = Outcome::Ok;
            Some(out.stats.clone())
        }
        Err(e) => {
            record.outcome = if e.is_budget() { Outcome::Budget } else { Outcome::Error };
            e.partial().map(|p| p.stats.clone())
        }
    };
    if let Some(s) = stats {
        record.mem_q = s.membership_queries;
        record.dontcare = s.dontcare_answers;
        record.val_q = s.validity_queries;
        record.unsat_rounds = s.unsat_rounds;
        record.symbols = s.input_symbols;
    }
    record.time_ms = started.elapsed().as_millis() as u64;
    record
}

/// Runs every entry with up to `parallelism` runs at once (0 = all cores).
/// Records come back in manifest order.
pub fn run_benchmarks(entries: &[ManifestEntry], base: &Path, config: &LearnerConfig, seed: u64, parallelism: usize) -> Vec<RunRecord> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(parallelism).build().expect("thread pool");
    pool.install(|| entries.par_iter().map(|e| run_one(e, base, config, seed)).collect())
}

pub fn write_csv<W: io::Write>(records: &[RunRecord], out: W) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| BenchError::Io { path: PathBuf::from("<csv>"), source })?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<RunRecord>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|e| e.map_err(BenchError::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub target_size: usize,
    pub completed: usize,
    pub total: usize,
}

/// Completed runs per target size, sizes ascending.
pub fn completion_table(records: &[RunRecord]) -> Vec<Completion> {
    let mut by_size: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = by_size.entry(r.target_size).or_default();
        e.1 += 1;
        if r.outcome == Outcome::Ok {
            e.0 += 1;
        }
    }
    by_size.into_iter().map(|(target_size, (completed, total))| Completion { target_size, completed, total }).collect()
}

/// Nearest-rank percentile, `p` in `[0, 100]`.
pub fn percentile(values: &[u64], p: f64) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}
