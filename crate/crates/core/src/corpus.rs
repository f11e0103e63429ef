//! Hotel/review corpora: synthetic generation, CSV ingestion and statistics.
//!
//! Reviews exist only as a score plus 36 engineered feature bits. Synthetic
//! corpora draw hotel mean scores from a two-component truncated-normal
//! mixture (bad hotels below the quality threshold, good hotels above it),
//! scatter seven review scores around each mean, and sample feature bits from
//! a per-feature logistic link on the review score.
//!
//! # CSV formats
//!
//! Corpus: `hotel_id,review_id,score,ef_0,...,ef_35`, one row per review,
//! seven rows per hotel. Interaction logs: `source,dm_id,strategy_id,
//! game_index,round_index,hotel_id,shown_review_id,decision,hotel_good,
//! reaction_seconds,payoff`, one row per round. Lines starting with `#` are
//! comments (used for the producing config hash).

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::game::{
    round_payoff, Decision, DmId, EfBits, GameError, GameRecord, Hotel, HotelId, Review, ReviewId,
    RoundRecord, Source, StrategyId, EF_COUNT, GOOD_THRESHOLD, MAX_SCORE, MIN_SCORE,
    REVIEWS_PER_HOTEL, ROUNDS_PER_GAME,
};
use crate::interactions::InteractionLog;
use crate::rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}: hotel {hotel}: score {score} outside [1, 10]")]
    BadScoreRange { row: usize, hotel: String, score: f64 },
    #[error("hotel {hotel}: expected {REVIEWS_PER_HOTEL} reviews, found {count}")]
    WrongReviewCount { hotel: String, count: usize },
    #[error("row {row}: column {column:?}: cannot parse {value:?}")]
    BadValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: duplicate review id {review}")]
    DuplicateReview { row: usize, review: u32 },
    #[error("row {row}: {message}")]
    Inconsistent { row: usize, message: String },
    #[error("corpus must contain at least {min} hotels, got {got}")]
    TooSmall { min: usize, got: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Logistic link from review score to the probability of each feature bit:
/// `P(bit f) = logistic(alpha_f + beta_f * (score - 8))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EfLinkModel {
    pub version: u32,
    pub params: [(f64, f64); EF_COUNT],
}

/// Frozen link constants, version 1. Layout follows the feature table: nine
/// positive topics, eight positive-part properties, eight negative topics,
/// eight negative-part properties, three positive/negative length-ratio bins.
/// Hand-tuned once so that topic polarity tracks the score; not refit.
pub const EF_LINK_V1: [(f64, f64); EF_COUNT] = [
    // positive topics
    (-0.2, 0.9),
    (-0.6, 0.6),
    (-0.8, 0.7),
    (0.1, 0.8),
    (-0.1, 0.9),
    (0.0, 1.0),
    (-1.0, 0.5),
    (-0.9, 0.4),
    (-0.7, 0.7),
    // positive part: empty, summary sentence, length bins, word groups
    (-1.6, -1.1),
    (-0.2, 0.8),
    (0.3, -0.5),
    (-0.6, 0.1),
    (-1.3, 0.6),
    (-0.5, 0.8),
    (-0.8, 0.3),
    (-0.9, -0.2),
    // negative topics
    (-0.6, -0.9),
    (-0.3, -1.0),
    (-0.9, -0.8),
    (-0.2, -0.9),
    (-1.0, -0.6),
    (-1.2, -0.5),
    (-0.7, -0.7),
    (-1.3, -0.4),
    // negative part: empty, summary sentence, length bins, word groups
    (-0.4, 1.1),
    (-0.6, -0.8),
    (0.3, 0.6),
    (-0.8, -0.2),
    (-1.5, -0.8),
    (-0.6, -0.9),
    (-0.5, -0.4),
    (-0.8, 0.2),
    // length ratio bins [0,0.7], (0.7,4), [4,inf)
    (-0.6, -0.9),
    (0.3, 0.0),
    (-1.0, 0.9),
];

impl Default for EfLinkModel {
    fn default() -> Self {
        Self {
            version: 1,
            params: EF_LINK_V1,
        }
    }
}

impl EfLinkModel {
    pub fn probability(&self, feature: usize, score: f64) -> f64 {
        let (alpha, beta) = self.params[feature];
        1.0 / (1.0 + (-(alpha + beta * (score - GOOD_THRESHOLD))).exp())
    }
}

/// Truncated normal sampled by rejection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncatedNormal {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let normal = Normal::new(self.mean, self.std).expect("valid normal");
        loop {
            let x = normal.sample(rng);
            if (self.lo..=self.hi).contains(&x) {
                return x;
            }
        }
    }
}

/// Parameters of the synthetic hotel-score mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationParams {
    /// Fraction of hotels drawn from the good component. Component counts are
    /// stratified: exactly `round(good_weight * n)` hotels are good.
    pub good_weight: f64,
    pub good: TruncatedNormal,
    pub bad: TruncatedNormal,
    /// Standard deviation of review scores around the hotel mean.
    pub review_noise: f64,
    pub link: EfLinkModel,
}

impl Default for GenerationParams {
    fn default() -> Self {
        // The margin keeps every drawn mean strictly on its side of the
        // threshold after floating-point re-centring.
        let margin = 1e-9;
        Self {
            good_weight: 0.505,
            good: TruncatedNormal {
                mean: 8.5,
                std: 0.5,
                lo: GOOD_THRESHOLD + margin,
                hi: 9.7,
            },
            bad: TruncatedNormal {
                mean: 7.3,
                std: 0.55,
                lo: 5.0,
                hi: GOOD_THRESHOLD - margin,
            },
            review_noise: 0.8,
            link: EfLinkModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    hotels: Vec<Hotel>,
    pub generation_seed: Option<u64>,
    hotel_index: HashMap<HotelId, usize>,
    review_index: HashMap<ReviewId, (usize, usize)>,
}

impl Corpus {
    pub fn new(hotels: Vec<Hotel>, generation_seed: Option<u64>) -> Result<Self, CorpusError> {
        let mut hotel_index = HashMap::with_capacity(hotels.len());
        let mut review_index = HashMap::with_capacity(hotels.len() * REVIEWS_PER_HOTEL);
        for (h, hotel) in hotels.iter().enumerate() {
            if hotel_index.insert(hotel.id, h).is_some() {
                return Err(CorpusError::Inconsistent {
                    row: 0,
                    message: format!("duplicate hotel id {}", hotel.id),
                });
            }
            for (r, review) in hotel.reviews().iter().enumerate() {
                if review_index.insert(review.id, (h, r)).is_some() {
                    return Err(CorpusError::DuplicateReview {
                        row: 0,
                        review: review.id.0,
                    });
                }
            }
        }
        Ok(Self {
            hotels,
            generation_seed,
            hotel_index,
            review_index,
        })
    }

    pub fn hotels(&self) -> &[Hotel] {
        &self.hotels
    }

    pub fn len(&self) -> usize {
        self.hotels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hotels.is_empty()
    }

    pub fn hotel(&self, id: HotelId) -> Option<&Hotel> {
        self.hotel_index.get(&id).map(|&i| &self.hotels[i])
    }

    pub fn review(&self, id: ReviewId) -> Option<&Review> {
        self.review_index
            .get(&id)
            .map(|&(h, r)| &self.hotels[h].reviews()[r])
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "hotel_id".to_string(),
            "review_id".to_string(),
            "score".to_string(),
        ];
        header.extend((0..EF_COUNT).map(|i| format!("ef_{i}")));
        w.write_record(&header).expect("in-memory write");
        for hotel in &self.hotels {
            for review in hotel.reviews() {
                let mut row = vec![
                    hotel.id.to_string(),
                    review.id.to_string(),
                    review.score.to_string(),
                ];
                row.extend(review.ef.iter().map(|b| if b { "1" } else { "0" }.to_string()));
                w.write_record(&row).expect("in-memory write");
            }
        }
        w.into_inner().expect("in-memory flush")
    }

    /// SHA-256 of the canonical CSV serialization.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_bytes()))
    }

    pub fn write_csv(&self, path: &Path, config_hash: Option<&str>) -> Result<(), CorpusError> {
        let mut f = std::fs::File::create(path)?;
        if let Some(h) = config_hash {
            writeln!(f, "# config_hash={h}")?;
        }
        f.write_all(&self.to_csv_bytes())?;
        Ok(())
    }
}

/// Generates a synthetic corpus of `n_hotels` hotels with default parameters.
pub fn generate_corpus(seed: u64, n_hotels: usize) -> Result<Corpus, CorpusError> {
    generate_corpus_with(seed, n_hotels, &GenerationParams::default())
}

pub fn generate_corpus_with(
    seed: u64,
    n_hotels: usize,
    params: &GenerationParams,
) -> Result<Corpus, CorpusError> {
    if n_hotels < 2 {
        return Err(CorpusError::TooSmall {
            min: 2,
            got: n_hotels,
        });
    }
    let n_good = (params.good_weight * n_hotels as f64).round() as usize;
    let mut labels: Vec<bool> = (0..n_hotels).map(|i| i < n_good).collect();
    labels.shuffle(&mut rng::stream(seed, &[rng::label::CORPUS_LAYOUT]));

    let hotels = labels
        .iter()
        .enumerate()
        .map(|(i, &good)| {
            let mut rng = rng::stream(seed, &[rng::label::CORPUS, i as u64]);
            generate_hotel(i as u32, good, params, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Corpus::new(hotels, Some(seed))
}

fn generate_hotel<R: Rng>(
    index: u32,
    good: bool,
    params: &GenerationParams,
    rng: &mut R,
) -> Result<Hotel, CorpusError> {
    let component = if good { &params.good } else { &params.bad };
    let target = component.sample(rng);
    let noise = Normal::new(0.0, params.review_noise).expect("valid noise");
    let mut scores: Vec<f64> = (0..REVIEWS_PER_HOTEL)
        .map(|_| (target + noise.sample(rng)).clamp(MIN_SCORE, MAX_SCORE))
        .collect();
    recentre(&mut scores, target);

    let reviews = scores
        .iter()
        .enumerate()
        .map(|(r, &score)| {
            let mut ef = EfBits::default();
            for f in 0..EF_COUNT {
                ef.set(f, rng.random::<f64>() < params.link.probability(f, score));
            }
            let id = ReviewId(index * REVIEWS_PER_HOTEL as u32 + r as u32);
            Review::new(id, score, ef)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Hotel::new(HotelId(index), reviews)?)
}

/// Shifts scores so their mean equals `target`, re-clipping to the score
/// range until the shift is absorbed by the unclipped reviews.
fn recentre(scores: &mut [f64], target: f64) {
    for _ in 0..100 {
        let diff = target - scores.iter().sum::<f64>() / scores.len() as f64;
        if diff.abs() < 1e-13 {
            break;
        }
        for s in scores.iter_mut() {
            *s = (*s + diff).clamp(MIN_SCORE, MAX_SCORE);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub n: usize,
    pub good_fraction: f64,
    /// Lower-middle element for even `n`.
    pub median_mean_score: f64,
    /// Review-score counts in unit bins `[1,2), ..., [9,10]`.
    pub score_histogram: [usize; 9],
}

pub fn corpus_stats(corpus: &Corpus) -> Option<CorpusStats> {
    if corpus.is_empty() {
        return None;
    }
    let n = corpus.len();
    let good = corpus.hotels().iter().filter(|h| h.good()).count();
    let mut means: Vec<f64> = corpus.hotels().iter().map(|h| h.mean_score()).collect();
    means.sort_by(f64::total_cmp);
    let mut score_histogram = [0usize; 9];
    for review in corpus.hotels().iter().flat_map(|h| h.reviews()) {
        let bin = ((review.score - MIN_SCORE).floor() as usize).min(8);
        score_histogram[bin] += 1;
    }
    Some(CorpusStats {
        n,
        good_fraction: good as f64 / n as f64,
        median_mean_score: means[(n - 1) / 2],
        score_histogram,
    })
}

/// Maps logical column names to the headers used in a particular file.
/// Unmapped columns are looked up under their logical name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchemaMap {
    pub columns: HashMap<String, String>,
}

impl SchemaMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn with(mut self, logical: &str, header: &str) -> Self {
        self.columns.insert(logical.to_string(), header.to_string());
        self
    }

    fn header_for<'a>(&'a self, logical: &'a str) -> &'a str {
        self.columns.get(logical).map_or(logical, String::as_str)
    }
}

struct Columns {
    positions: HashMap<String, usize>,
}

impl Columns {
    fn locate(
        headers: &csv::StringRecord,
        schema: &SchemaMap,
        required: &[String],
        optional: &[&str],
    ) -> Result<Self, CorpusError> {
        let mut positions = HashMap::new();
        let find = |logical: &str| {
            let header = schema.header_for(logical);
            headers.iter().position(|h| h.trim() == header)
        };
        for logical in required {
            let pos = find(logical).ok_or_else(|| CorpusError::MissingColumn(logical.clone()))?;
            positions.insert(logical.clone(), pos);
        }
        for &logical in optional {
            if let Some(pos) = find(logical) {
                positions.insert(logical.to_string(), pos);
            }
        }
        Ok(Self { positions })
    }

    fn has(&self, logical: &str) -> bool {
        self.positions.contains_key(logical)
    }

    fn raw<'r>(&self, rec: &'r csv::StringRecord, logical: &str) -> &'r str {
        self.positions
            .get(logical)
            .and_then(|&p| rec.get(p))
            .unwrap_or("")
            .trim()
    }

    fn parse<T: std::str::FromStr>(
        &self,
        rec: &csv::StringRecord,
        row: usize,
        logical: &str,
    ) -> Result<T, CorpusError> {
        let value = self.raw(rec, logical);
        value.parse().map_err(|_| CorpusError::BadValue {
            row,
            column: logical.to_string(),
            value: value.to_string(),
        })
    }
}

fn parse_bool(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "good" => Some(true),
        "0" | "false" | "no" | "bad" => Some(false),
        _ => None,
    }
}

fn parse_decision(value: &str) -> Option<Decision> {
    match value.to_ascii_lowercase().as_str() {
        "go" | "1" | "true" => Some(Decision::Go),
        "stay" | "0" | "false" => Some(Decision::Stay),
        _ => None,
    }
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

pub fn ingest_corpus_csv(path: &Path, schema: &SchemaMap) -> Result<Corpus, CorpusError> {
    read_corpus_csv(std::fs::File::open(path)?, schema)
}

pub fn read_corpus_csv<R: Read>(input: R, schema: &SchemaMap) -> Result<Corpus, CorpusError> {
    let mut reader = csv_reader(input);
    let mut required: Vec<String> = ["hotel_id", "review_id", "score"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    required.extend((0..EF_COUNT).map(|i| format!("ef_{i}")));
    let cols = Columns::locate(reader.headers()?, schema, &required, &[])?;

    // Hotels keep first-appearance order; reviews keep row order.
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(usize, Review)>> = HashMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let hotel = cols.raw(&rec, "hotel_id").to_string();
        let review_id: u32 = cols.parse(&rec, row, "review_id")?;
        let score: f64 = cols.parse(&rec, row, "score")?;
        if !(MIN_SCORE..=MAX_SCORE).contains(&score) {
            return Err(CorpusError::BadScoreRange { row, hotel, score });
        }
        let mut ef = EfBits::default();
        for f in 0..EF_COUNT {
            let column = format!("ef_{f}");
            let raw = cols.raw(&rec, &column);
            let bit = match raw {
                "0" => false,
                "1" => true,
                _ => {
                    return Err(CorpusError::BadValue {
                        row,
                        column,
                        value: raw.to_string(),
                    })
                }
            };
            ef.set(f, bit);
        }
        if !rows.contains_key(&hotel) {
            order.push(hotel.clone());
        }
        rows.entry(hotel)
            .or_default()
            .push((row, Review::new(ReviewId(review_id), score, ef)?));
    }

    let mut hotels = Vec::with_capacity(order.len());
    let mut seen_reviews: HashMap<ReviewId, usize> = HashMap::new();
    for name in order {
        let reviews = rows.remove(&name).unwrap_or_default();
        if reviews.len() != REVIEWS_PER_HOTEL {
            return Err(CorpusError::WrongReviewCount {
                hotel: name,
                count: reviews.len(),
            });
        }
        for (row, review) in &reviews {
            if seen_reviews.insert(review.id, *row).is_some() {
                return Err(CorpusError::DuplicateReview {
                    row: *row,
                    review: review.id.0,
                });
            }
        }
        let id: u32 = name.parse().map_err(|_| CorpusError::BadValue {
            row: reviews[0].0,
            column: "hotel_id".to_string(),
            value: name.clone(),
        })?;
        let reviews = reviews.into_iter().map(|(_, r)| r).collect();
        hotels.push(Hotel::new(HotelId(id), reviews)?);
    }
    Corpus::new(hotels, None)
}

/// Reaction-time bin edges in seconds; bin `i` covers `[EDGES[i], EDGES[i+1])`
/// and the last bin is open-ended.
pub const REACTION_BIN_EDGES: [f64; 9] = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.5, 12.0, 20.0];
pub const REACTION_BINS: usize = 9;

pub fn reaction_bin(seconds: f64) -> u8 {
    REACTION_BIN_EDGES
        .iter()
        .rposition(|&edge| seconds >= edge)
        .unwrap_or(0) as u8
}

const INTERACTION_COLUMNS: [&str; 9] = [
    "dm_id",
    "strategy_id",
    "game_index",
    "round_index",
    "hotel_id",
    "shown_review_id",
    "decision",
    "hotel_good",
    "reaction_seconds",
];

pub fn ingest_interactions_csv(
    path: &Path,
    schema: &SchemaMap,
    corpus: Option<&Corpus>,
) -> Result<InteractionLog, CorpusError> {
    read_interactions_csv(std::fs::File::open(path)?, schema, corpus)
}

/// Reads an interaction log. Rows must be grouped by game in round order.
/// Rows without a `source` column are treated as human play; human rows need
/// a reaction time, which is mapped to its bin. Payoffs are recomputed from
/// decision and quality and, when a `payoff` column or a corpus is present,
/// cross-checked against them.
pub fn read_interactions_csv<R: Read>(
    input: R,
    schema: &SchemaMap,
    corpus: Option<&Corpus>,
) -> Result<InteractionLog, CorpusError> {
    let mut reader = csv_reader(input);
    let required: Vec<String> = INTERACTION_COLUMNS.iter().map(|s| s.to_string()).collect();
    let cols = Columns::locate(reader.headers()?, schema, &required, &["source", "payoff"])?;

    let mut games = Vec::new();
    let mut pending: Vec<RoundRecord> = Vec::new();
    let mut pending_key: Option<(DmId, StrategyId, u32, Source, usize)> = None;
    let mut row = 0;

    let finish = |key: (DmId, StrategyId, u32, Source, usize),
                  rounds: Vec<RoundRecord>|
     -> Result<GameRecord, CorpusError> {
        let (dm, strategy, game_index, source, first_row) = key;
        GameRecord::new(dm, strategy, game_index, source, rounds).map_err(|_| {
            CorpusError::Inconsistent {
                row: first_row,
                message: format!(
                    "game {game_index} of dm {dm} vs strategy {strategy} must have rounds 1..={ROUNDS_PER_GAME} in order"
                ),
            }
        })
    };

    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        row = i + 1;
        let source = if cols.has("source") {
            match cols.raw(&rec, "source").to_ascii_lowercase().as_str() {
                "sim" => Source::Sim,
                "human" => Source::Human,
                other => {
                    return Err(CorpusError::BadValue {
                        row,
                        column: "source".into(),
                        value: other.into(),
                    })
                }
            }
        } else {
            Source::Human
        };
        let dm = DmId(cols.parse(&rec, row, "dm_id")?);
        let strategy = StrategyId(cols.parse(&rec, row, "strategy_id")?);
        let game_index: u32 = cols.parse(&rec, row, "game_index")?;
        let round_index: u8 = cols.parse(&rec, row, "round_index")?;
        let hotel_id = HotelId(cols.parse(&rec, row, "hotel_id")?);
        let review_id = ReviewId(cols.parse(&rec, row, "shown_review_id")?);
        let bad = |column: &str| CorpusError::BadValue {
            row,
            column: column.to_string(),
            value: cols.raw(&rec, column).to_string(),
        };
        let decision = parse_decision(cols.raw(&rec, "decision")).ok_or_else(|| bad("decision"))?;
        let hotel_good =
            parse_bool(cols.raw(&rec, "hotel_good")).ok_or_else(|| bad("hotel_good"))?;
        let reaction_raw = cols.raw(&rec, "reaction_seconds");
        let bin = match (source, reaction_raw.is_empty()) {
            (Source::Sim, true) => 0,
            _ => {
                let seconds: f64 = reaction_raw.parse().map_err(|_| bad("reaction_seconds"))?;
                if !(seconds >= 0.0) {
                    return Err(bad("reaction_seconds"));
                }
                if source == Source::Sim {
                    0
                } else {
                    reaction_bin(seconds)
                }
            }
        };

        let record = RoundRecord::new(round_index, hotel_id, review_id, decision, hotel_good, bin);
        if cols.has("payoff") && !cols.raw(&rec, "payoff").is_empty() {
            let stated: u8 = cols.parse(&rec, row, "payoff")?;
            if stated != round_payoff(decision, hotel_good) {
                return Err(CorpusError::Inconsistent {
                    row,
                    message: format!(
                        "payoff {stated} disagrees with decision and hotel quality"
                    ),
                });
            }
        }
        if let Some(corpus) = corpus {
            let hotel = corpus.hotel(hotel_id).ok_or_else(|| CorpusError::Inconsistent {
                row,
                message: format!("unknown hotel {hotel_id}"),
            })?;
            if hotel.good() != hotel_good {
                return Err(CorpusError::Inconsistent {
                    row,
                    message: format!("hotel_good disagrees with corpus for hotel {hotel_id}"),
                });
            }
            if !hotel.reviews().iter().any(|r| r.id == review_id) {
                return Err(CorpusError::Inconsistent {
                    row,
                    message: format!("review {review_id} does not belong to hotel {hotel_id}"),
                });
            }
        }

        let key = (dm, strategy, game_index, source, row);
        let same_game = pending_key
            .map(|k| (k.0, k.1, k.2) == (dm, strategy, game_index))
            .unwrap_or(false);
        if !same_game {
            if let Some(k) = pending_key.take() {
                games.push(finish(k, std::mem::take(&mut pending))?);
            }
            pending_key = Some(key);
        }
        pending.push(record);
    }
    if let Some(k) = pending_key {
        games.push(finish(k, pending)?);
    }
    let log = InteractionLog::new(games);
    validate_episodes(&log).map_err(|message| CorpusError::Inconsistent { row, message })?;
    Ok(log)
}

/// Checks that every episode numbers its games 1, 2, ... in order.
pub fn validate_episodes(log: &InteractionLog) -> Result<(), String> {
    for ep in log.episodes() {
        for (i, g) in ep.games.iter().enumerate() {
            if g.game_index != i as u32 + 1 {
                return Err(format!(
                    "dm {} vs strategy {}: game index {} where {} was expected",
                    ep.dm_id,
                    ep.strategy_id,
                    g.game_index,
                    i + 1
                ));
            }
        }
    }
    Ok(())
}

/// Serializes a log in the interaction CSV format. Human reaction times are
/// written as the lower edge of their bin, so re-ingestion is lossless.
pub fn interactions_to_csv_bytes(log: &InteractionLog) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["source"];
    header.extend(INTERACTION_COLUMNS);
    header.push("payoff");
    w.write_record(&header).expect("in-memory write");
    for g in &log.games {
        for r in &g.rounds {
            let (source, reaction) = match g.source {
                Source::Sim => ("sim", String::new()),
                Source::Human => (
                    "human",
                    REACTION_BIN_EDGES[usize::from(r.reaction_bin)].to_string(),
                ),
            };
            w.write_record([
                source.to_string(),
                g.dm_id.to_string(),
                g.strategy_id.to_string(),
                g.game_index.to_string(),
                r.round_index.to_string(),
                r.hotel_id.to_string(),
                r.shown_review_id.to_string(),
                if r.decision.is_go() { "go" } else { "stay" }.to_string(),
                u8::from(r.hotel_good).to_string(),
                reaction,
                r.dm_payoff.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_interactions_csv(
    log: &InteractionLog,
    path: &Path,
    config_hash: Option<&str>,
) -> Result<(), CorpusError> {
    let mut f = std::fs::File::create(path)?;
    if let Some(h) = config_hash {
        writeln!(f, "# config_hash={h}")?;
    }
    f.write_all(&interactions_to_csv_bytes(log))?;
    Ok(())
}

/// Reads the `# config_hash=...` comment of an artifact, if present.
pub fn read_config_hash(path: &Path) -> Result<Option<String>, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# config_hash=").map(|h| h.trim().to_string())))
}

/// Per-hotel good/bad counts keyed by hotel id; handy for fixtures.
pub fn quality_map(corpus: &Corpus) -> BTreeMap<HotelId, bool> {
    corpus.hotels().iter().map(|h| (h.id, h.good())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::hotel_quality;

    fn small_csv(hotels: &[(u32, [f64; 7])]) -> String {
        let mut s = String::from("hotel_id,review_id,score");
        for i in 0..EF_COUNT {
            s.push_str(&format!(",ef_{i}"));
        }
        s.push('\n');
        let mut rid = 0;
        for (h, scores) in hotels {
            for score in scores {
                s.push_str(&format!("{h},{rid},{score}"));
                for i in 0..EF_COUNT {
                    s.push_str(if (rid + i) % 3 == 0 { ",1" } else { ",0" });
                }
                s.push('\n');
                rid += 1;
            }
        }
        s
    }

    #[test]
    fn ingest_well_formed() {
        let csv = small_csv(&[(10, [8.0; 7]), (11, [6.5; 7])]);
        let c = read_corpus_csv(csv.as_bytes(), &SchemaMap::identity()).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.hotel(HotelId(10)).unwrap().good());
        assert!(!c.hotel(HotelId(11)).unwrap().good());
        assert_eq!(c.generation_seed, None);
    }

    #[test]
    fn ingest_rejects_wrong_review_count() {
        let mut csv = small_csv(&[(10, [8.0; 7])]);
        csv = csv.lines().take(7).collect::<Vec<_>>().join("\n");
        let err = read_corpus_csv(csv.as_bytes(), &SchemaMap::identity()).unwrap_err();
        assert!(matches!(err, CorpusError::WrongReviewCount { count: 6, .. }), "{err}");
    }

    #[test]
    fn ingest_rejects_bad_score() {
        let mut scores = [8.0; 7];
        scores[2] = 11.0;
        let csv = small_csv(&[(10, scores)]);
        let err = read_corpus_csv(csv.as_bytes(), &SchemaMap::identity()).unwrap_err();
        assert!(matches!(err, CorpusError::BadScoreRange { row: 3, .. }), "{err}");
    }

    #[test]
    fn ingest_reports_missing_column() {
        let csv = small_csv(&[(10, [8.0; 7])]).replace("ef_17", "ef_x");
        let err = read_corpus_csv(csv.as_bytes(), &SchemaMap::identity()).unwrap_err();
        assert!(matches!(err, CorpusError::MissingColumn(ref c) if c == "ef_17"));
    }

    #[test]
    fn schema_map_renames_columns() {
        let csv = small_csv(&[(10, [8.0; 7])]).replace("score", "rating");
        let schema = SchemaMap::identity().with("score", "rating");
        assert_eq!(read_corpus_csv(csv.as_bytes(), &schema).unwrap().len(), 1);
    }

    #[test]
    fn generated_corpus_shape() {
        let c = generate_corpus(11, 1068).unwrap();
        assert_eq!(c.len(), 1068);
        for h in c.hotels() {
            assert_eq!(h.reviews().len(), 7);
            let scores: Vec<f64> = h.reviews().iter().map(|r| r.score).collect();
            assert_eq!(hotel_quality(&scores).unwrap(), h.good());
        }
        let stats = corpus_stats(&c).unwrap();
        assert!((0.47..=0.53).contains(&stats.good_fraction), "{stats:?}");
        assert!((7.91..=8.11).contains(&stats.median_mean_score), "{stats:?}");
        assert_eq!(stats.score_histogram.iter().sum::<usize>(), 1068 * 7);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_corpus(5, 300).unwrap();
        let b = generate_corpus(5, 300).unwrap();
        assert_eq!(a.to_csv_bytes(), b.to_csv_bytes());
        assert_ne!(a.to_csv_bytes(), generate_corpus(6, 300).unwrap().to_csv_bytes());
    }

    #[test]
    fn recentring_hits_the_drawn_mean() {
        let mut s = vec![9.9, 10.0, 10.0, 9.5, 9.8, 10.0, 10.0];
        recentre(&mut s, 9.6);
        let m = s.iter().sum::<f64>() / 7.0;
        assert!((m - 9.6).abs() < 1e-12);
        assert!(s.iter().all(|&x| (1.0..=10.0).contains(&x)));
    }

    #[test]
    fn ef_bits_track_link_sign() {
        let c = generate_corpus(3, 1068).unwrap();
        let reviews: Vec<&Review> = c.hotels().iter().flat_map(|h| h.reviews()).collect();
        let n = reviews.len() as f64;
        let mean_s = reviews.iter().map(|r| r.score).sum::<f64>() / n;
        for (f, &(_, beta)) in EF_LINK_V1.iter().enumerate() {
            if beta.abs() <= 0.5 {
                continue;
            }
            let ones: Vec<f64> = reviews.iter().filter(|r| r.ef.get(f)).map(|r| r.score).collect();
            let zeros: Vec<f64> = reviews.iter().filter(|r| !r.ef.get(f)).map(|r| r.score).collect();
            let m1 = ones.iter().sum::<f64>() / ones.len() as f64;
            let m0 = zeros.iter().sum::<f64>() / zeros.len() as f64;
            // Point-biserial correlation has the sign of m1 - m0.
            assert_eq!((m1 - m0).signum(), beta.signum(), "feature {f}, mean {mean_s}");
        }
    }

    #[test]
    fn stats_fixtures() {
        let one = read_corpus_csv(
            small_csv(&[(1, [9.0; 7])]).as_bytes(),
            &SchemaMap::identity(),
        )
        .unwrap();
        let s = corpus_stats(&one).unwrap();
        assert_eq!((s.n, s.good_fraction), (1, 1.0));
        let two = read_corpus_csv(
            small_csv(&[(1, [9.0; 7]), (2, [6.0; 7])]).as_bytes(),
            &SchemaMap::identity(),
        )
        .unwrap();
        let s = corpus_stats(&two).unwrap();
        assert_eq!(s.median_mean_score, 6.0);
        assert_eq!(s.good_fraction, 0.5);
    }

    #[test]
    fn corpus_csv_roundtrip_is_fixed_point() {
        let c = generate_corpus(9, 40).unwrap();
        let bytes = c.to_csv_bytes();
        let back = read_corpus_csv(bytes.as_slice(), &SchemaMap::identity()).unwrap();
        assert_eq!(back.to_csv_bytes(), bytes);
        assert_eq!(back.hotels(), c.hotels());
    }

    #[test]
    fn reaction_bins() {
        assert_eq!(reaction_bin(0.0), 0);
        assert_eq!(reaction_bin(0.7), 1);
        assert_eq!(reaction_bin(2.5), 3);
        assert_eq!(reaction_bin(3.0), 4);
        assert_eq!(reaction_bin(25.0), 8);
        for (i, &edge) in REACTION_BIN_EDGES.iter().enumerate() {
            assert_eq!(usize::from(reaction_bin(edge)), i);
        }
    }

    fn interaction_csv(rows: &[(&str, &str)]) -> String {
        // (decision, hotel_good) per round of one 10-round game
        let mut s = String::from(
            "dm_id,strategy_id,game_index,round_index,hotel_id,shown_review_id,decision,hotel_good,reaction_seconds\n",
        );
        for (i, (d, g)) in rows.iter().enumerate() {
            s.push_str(&format!("1,2,1,{},{},{},{d},{g},2.5\n", i + 1, i, i * 7));
        }
        s
    }

    #[test]
    fn ingest_interactions_recomputes_payoffs() {
        let rows: Vec<(&str, &str)> = (0..10)
            .map(|i| if i % 2 == 0 { ("go", "1") } else { ("stay", "1") })
            .collect();
        let log = read_interactions_csv(
            interaction_csv(&rows).as_bytes(),
            &SchemaMap::identity(),
            None,
        )
        .unwrap();
        assert_eq!(log.games.len(), 1);
        let g = &log.games[0];
        assert_eq!(g.source, Source::Human);
        assert_eq!(g.rounds[0].dm_payoff, 1);
        assert_eq!(g.rounds[1].dm_payoff, 0);
        assert_eq!(g.total_payoff, 5);
        assert_eq!(g.rounds[0].reaction_bin, 3);
    }

    #[test]
    fn ingest_interactions_rejects_short_game_with_row() {
        let rows: Vec<(&str, &str)> = (0..9).map(|_| ("go", "1")).collect();
        let err = read_interactions_csv(
            interaction_csv(&rows).as_bytes(),
            &SchemaMap::identity(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::Inconsistent { row: 1, .. }), "{err}");
    }

    #[test]
    fn ingest_interactions_cross_checks_payoff_column() {
        let mut s = String::from(
            "dm_id,strategy_id,game_index,round_index,hotel_id,shown_review_id,decision,hotel_good,reaction_seconds,payoff\n",
        );
        for i in 1..=10 {
            let payoff = if i == 4 { 0 } else { 1 };
            s.push_str(&format!("1,2,1,{i},0,0,go,true,1.0,{payoff}\n"));
        }
        let err = read_interactions_csv(s.as_bytes(), &SchemaMap::identity(), None).unwrap_err();
        assert!(matches!(err, CorpusError::Inconsistent { row: 4, .. }), "{err}");
    }
}
