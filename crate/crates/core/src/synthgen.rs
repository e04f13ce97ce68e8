//! Seeded synthetic heterogeneous social graphs with planted bots.
//!
//! Users follow each other by preferential attachment, post tweets that
//! carry hashtags and entities, comment on and retweet tweets. Bots differ
//! from benign users by a mean shift of their own and authored content
//! features, and camouflage themselves by following popular benign users.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, Zipf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hetgraph::{build_graph, EdgeSpec, EdgeType, GraphError, HetGraph, Masks, NodeSpec, NodeType};

/// Follow edges each new user draws by preferential attachment.
const FOLLOWS_PER_USER: usize = 2;
/// Chance a follow is reciprocated.
const FOLLOW_BACK_PROB: f64 = 0.3;
/// Probability of rejecting a follow candidate of the other class.
const FOLLOW_HOMOPHILY: f64 = 0.8;
/// Draws after which a user accepts any candidate.
const MAX_FOLLOW_DRAWS: usize = 64;
const COMMENTS_PER_USER: f64 = 0.5;
const RETWEETS_PER_USER: f64 = 0.5;
/// Chance a comment also tags a hashtag (an edge no default meta-path keeps).
const COMMENT_TAG_PROB: f64 = 0.3;
const EXTRA_TAG_PROB: f64 = 0.3;
const ZIPF_EXPONENT: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("infeasible config: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    pub bot_fraction: f64,
    pub labeled_fraction: f64,
    pub feature_dim: usize,
    /// Mean shift between bot and benign feature distributions.
    pub class_separation: f64,
    /// Probability a bot follows a top-decile benign user.
    pub camouflage_rate: f64,
    pub tweets_per_user: f64,
    pub hashtag_pool: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_users: 2000,
            bot_fraction: 0.3,
            labeled_fraction: 0.05,
            feature_dim: 16,
            class_separation: 1.5,
            camouflage_rate: 0.5,
            tweets_per_user: 3.0,
            hashtag_pool: 100,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.n_users < 10 {
            return bad("n_users must be at least 10");
        }
        if !(self.bot_fraction > 0.0 && self.bot_fraction < 1.0) {
            return bad("bot_fraction must lie in (0, 1)");
        }
        if !(self.labeled_fraction > 0.0 && self.labeled_fraction <= 1.0) {
            return bad("labeled_fraction must lie in (0, 1]");
        }
        if self.feature_dim < 4 {
            return bad("feature_dim must be at least 4");
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return bad("class_separation must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.camouflage_rate) {
            return bad("camouflage_rate must lie in [0, 1]");
        }
        if !(self.tweets_per_user >= 0.0 && self.tweets_per_user.is_finite()) {
            return bad("tweets_per_user must be finite and non-negative");
        }
        if self.hashtag_pool == 0 {
            return bad("hashtag_pool must be positive");
        }
        Ok(())
    }

    pub fn labeled_count(&self) -> usize {
        (self.labeled_fraction * self.n_users as f64).round() as usize
    }

    pub fn bot_count(&self) -> usize {
        (self.bot_fraction * self.n_users as f64).round() as usize
    }
}

/// A generated graph plus the ground truth of every user, labeled or not.
#[derive(Clone, Debug)]
pub struct SynthGraph {
    pub graph: HetGraph,
    /// `(external id, is_bot)` for all users, ascending by id.
    pub truth: Vec<(u64, u8)>,
}

struct Builder {
    rng: ChaCha8Rng,
    nodes: Vec<NodeSpec>,
    edges: Vec<EdgeSpec>,
    direction: Vec<f64>,
}

impl Builder {
    fn add_node(&mut self, node_type: NodeType, shift: f64) -> u64 {
        let id = self.nodes.len() as u64;
        let features = self
            .direction
            .iter()
            .map(|u| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                shift * u + z
            })
            .collect();
        self.nodes.push(NodeSpec {
            id,
            node_type,
            features,
        });
        id
    }

    fn edge(&mut self, src: u64, dst: u64, rel: EdgeType) {
        self.edges.push(EdgeSpec { src, dst, rel });
    }

    fn poisson(&mut self, mean: f64) -> usize {
        if mean <= 0.0 {
            return 0;
        }
        let d = Poisson::new(mean).expect("positive mean");
        d.sample(&mut self.rng) as usize
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthGraph, SynthError> {
    cfg.validate()?;
    let n = cfg.n_users;
    let n_bots = cfg.bot_count();
    let n_labeled = cfg.labeled_count();
    let labeled_bots = n_labeled / 2;
    let labeled_benign = n_labeled - labeled_bots;
    if n_labeled < 2 {
        return Err(SynthError::Infeasible(format!(
            "only {n_labeled} labeled users; need at least 2"
        )));
    }
    if n_bots < labeled_bots.max(1) || n - n_bots < labeled_benign {
        return Err(SynthError::Infeasible(format!(
            "{n_bots} bots among {n} users cannot supply {labeled_bots} labeled bots and {labeled_benign} labeled benign users"
        )));
    }

    let d = cfg.feature_dim;
    let norm = (d as f64).sqrt();
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        nodes: Vec::new(),
        edges: Vec::new(),
        direction: vec![1.0 / norm; d],
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut b.rng);
    let mut is_bot = vec![false; n];
    for &u in &order[..n_bots] {
        is_bot[u] = true;
    }
    let shift_of = |u: usize| if is_bot[u] { cfg.class_separation } else { 0.0 };

    for u in 0..n {
        b.add_node(NodeType::User, shift_of(u));
    }

    // Preferential attachment over (degree + 1).
    let mut degree = vec![0usize; n];
    let mut urn: Vec<usize> = Vec::new();
    let seed_users = (FOLLOWS_PER_USER + 1).min(n);
    for u in 0..seed_users {
        urn.push(u);
        for v in 0..u {
            b.edge(u as u64, v as u64, EdgeType::Follow);
            degree[u] += 1;
            degree[v] += 1;
            urn.push(u);
            urn.push(v);
        }
    }
    for u in seed_users..n {
        let mut chosen: Vec<usize> = Vec::with_capacity(FOLLOWS_PER_USER);
        let mut draws = 0;
        while chosen.len() < FOLLOWS_PER_USER {
            let v = urn[b.rng.gen_range(0..urn.len())];
            draws += 1;
            let rejected = is_bot[v] != is_bot[u]
                && draws < MAX_FOLLOW_DRAWS
                && b.rng.gen_bool(FOLLOW_HOMOPHILY);
            if !rejected && !chosen.contains(&v) {
                chosen.push(v);
            }
        }
        urn.push(u);
        for v in chosen {
            b.edge(u as u64, v as u64, EdgeType::Follow);
            if b.rng.gen_bool(FOLLOW_BACK_PROB) {
                b.edge(v as u64, u as u64, EdgeType::Follow);
            }
            degree[u] += 1;
            degree[v] += 1;
            urn.push(u);
            urn.push(v);
        }
    }

    // Camouflage: bots follow popular benign users.
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by(|&a, &c| degree[c].cmp(&degree[a]).then(a.cmp(&c)));
    let hubs: Vec<usize> = by_degree[..(n / 10).max(1)]
        .iter()
        .copied()
        .filter(|&u| !is_bot[u])
        .collect();
    if !hubs.is_empty() {
        for u in 0..n {
            if is_bot[u] && b.rng.gen_bool(cfg.camouflage_rate) {
                let hub = hubs[b.rng.gen_range(0..hubs.len())];
                b.edge(u as u64, hub as u64, EdgeType::Follow);
            }
        }
    }

    let pool = cfg.hashtag_pool;
    let hashtags: Vec<u64> = (0..pool).map(|_| b.add_node(NodeType::Hashtag, 0.0)).collect();
    let entities: Vec<u64> = (0..pool).map(|_| b.add_node(NodeType::Entity, 0.0)).collect();
    let zipf = Zipf::new(pool as u64, ZIPF_EXPONENT).expect("pool is positive");

    let mut tweets_of: Vec<Vec<u64>> = vec![Vec::new(); n];
    let mut all_tweets: Vec<u64> = Vec::new();
    for u in 0..n {
        let count = b.poisson(cfg.tweets_per_user);
        for _ in 0..count {
            let t = b.add_node(NodeType::Tweet, shift_of(u));
            b.edge(u as u64, t, EdgeType::Post);
            let first_is_tag = b.rng.gen_bool(0.6);
            let mut tags = vec![first_is_tag];
            if b.rng.gen_bool(EXTRA_TAG_PROB) {
                tags.push(!first_is_tag);
            }
            for is_tag in tags {
                let rank = zipf.sample(&mut b.rng) as usize - 1;
                let target = if is_tag { hashtags[rank] } else { entities[rank] };
                b.edge(t, target, EdgeType::Contain);
            }
            tweets_of[u].push(t);
            all_tweets.push(t);
        }
    }

    // Interactions prefer tweets by followed users.
    let followees: Vec<Vec<usize>> = {
        let mut f = vec![Vec::new(); n];
        for e in &b.edges {
            if e.rel == EdgeType::Follow {
                f[e.src as usize].push(e.dst as usize);
            }
        }
        f
    };
    let pick_tweet = |b: &mut Builder, u: usize| -> Option<u64> {
        let candidates: Vec<u64> = followees[u]
            .iter()
            .flat_map(|&v| tweets_of[v].iter().copied())
            .collect();
        if !candidates.is_empty() && b.rng.gen_bool(0.8) {
            return Some(candidates[b.rng.gen_range(0..candidates.len())]);
        }
        if all_tweets.is_empty() {
            None
        } else {
            Some(all_tweets[b.rng.gen_range(0..all_tweets.len())])
        }
    };
    for u in 0..n {
        let comments = b.poisson(COMMENTS_PER_USER);
        for _ in 0..comments {
            let Some(t) = pick_tweet(&mut b, u) else { break };
            let c = b.add_node(NodeType::Comment, shift_of(u));
            b.edge(u as u64, c, EdgeType::Write);
            b.edge(c, t, EdgeType::Reply);
            if b.rng.gen_bool(COMMENT_TAG_PROB) {
                let rank = zipf.sample(&mut b.rng) as usize - 1;
                b.edge(c, hashtags[rank], EdgeType::Contain);
            }
        }
        let retweets = b.poisson(RETWEETS_PER_USER);
        for _ in 0..retweets {
            let Some(t) = pick_tweet(&mut b, u) else { break };
            b.edge(u as u64, t, EdgeType::Retweet);
        }
    }

    // Class-balanced labels.
    let mut bots: Vec<usize> = (0..n).filter(|&u| is_bot[u]).collect();
    let mut benign: Vec<usize> = (0..n).filter(|&u| !is_bot[u]).collect();
    bots.shuffle(&mut b.rng);
    benign.shuffle(&mut b.rng);
    let mut labels: Vec<(u64, u8)> = bots[..labeled_bots]
        .iter()
        .map(|&u| (u as u64, 1))
        .chain(benign[..labeled_benign].iter().map(|&u| (u as u64, 0)))
        .collect();
    labels.sort_unstable();

    let graph = build_graph(&b.nodes, &b.edges, &labels)?;
    let truth = (0..n).map(|u| (u as u64, is_bot[u] as u8)).collect();
    Ok(SynthGraph { graph, truth })
}

/// Stratified `n_folds`-way split of the target set. Fold `f` tests on
/// chunk `f`, validates on chunk `f + 1` (cyclically), and trains on the rest.
pub fn make_folds(g: &HetGraph, n_folds: usize, seed: u64) -> Result<Vec<Masks>, SynthError> {
    let targets = g.targets();
    if n_folds < 2 {
        return Err(SynthError::InvalidConfig("need at least 2 folds".into()));
    }
    if targets.len() < n_folds {
        return Err(SynthError::Infeasible(format!(
            "{} labeled users cannot fill {n_folds} folds",
            targets.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = targets.iter().copied().filter(|&t| g.label(t) == Some(1)).collect();
    let mut neg: Vec<usize> = targets.iter().copied().filter(|&t| g.label(t) == Some(0)).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut chunks: Vec<Vec<usize>> = vec![Vec::new(); n_folds];
    for (i, t) in pos.into_iter().chain(neg).enumerate() {
        chunks[i % n_folds].push(t);
    }
    for c in &mut chunks {
        c.sort_unstable();
    }
    Ok((0..n_folds)
        .map(|f| {
            let val_idx = (f + 1) % n_folds;
            let mut train: Vec<usize> = chunks
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != f && i != val_idx)
                .flat_map(|(_, c)| c.iter().copied())
                .collect();
            train.sort_unstable();
            Masks {
                train,
                val: chunks[val_idx].clone(),
                test: chunks[f].clone(),
            }
        })
        .collect())
}
