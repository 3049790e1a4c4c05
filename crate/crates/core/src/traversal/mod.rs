//! Autoregressive seam decoding under a 1-ring neighbor mask.
//!
//! The harness owns the mask and the sampling; a [`Scorer`] only produces
//! logits over the candidate space `[EOC, EOS, v0, .., vN-1]`.
//!
//! Sampling an EOS right after a vertex closes the open chain, so the
//! recorded history reads `.., v, EOC, EOS`, the same stream [`tokenize`]
//! produces. Call the sampled symbols *decisions*: they differ from the
//! recorded tokens only in that final `EOC, EOS` pair collapsing to `EOS`.
//!
//! [`tokenize`]: crate::seams::tokenize

mod dc;
mod scorers;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{AdjacencyTable, Edge, Mesh};
use crate::seams::{ChainSet, SeamChain, Token, TokenSequence};

pub use dc::{divide_and_conquer_decode, DcConfig, DcOutput, SubMesh, SubMeshRecord};
pub use scorers::{HeuristicScorer, ReplayScorer};

pub const DECODE_SCHEMA: &str = "seamforge.decode/1";

/// What the scorer sees besides the decode state.
#[derive(Clone, Copy)]
pub struct MeshContext<'a> {
    pub mesh: &'a Mesh,
    pub adjacency: &'a AdjacencyTable,
}

impl MeshContext<'_> {
    pub fn candidate_count(&self) -> usize {
        self.mesh.vertex_count() + Token::VERTEX_OFFSET
    }
}

/// Produces one finite logit per candidate.
pub trait Scorer {
    fn score(&mut self, state: &DecodeState, ctx: &MeshContext<'_>) -> Result<Vec<f64>>;
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score(&mut self, state: &DecodeState, ctx: &MeshContext<'_>) -> Result<Vec<f64>> {
        (**self).score(state, ctx)
    }
}

/// Token history plus the walk position derived from it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecodeState {
    history: Vec<Token>,
    decisions: Vec<Token>,
    current_vertex: Option<usize>,
    previous_vertex: Option<usize>,
    chain_start: Option<usize>,
    chain_position: usize,
    chains_closed: usize,
    allow_empty: bool,
}

impl DecodeState {
    pub fn new() -> Self {
        Self::default()
    }

    /// A state whose very first decision may be EOS (an empty seam set).
    pub fn allowing_empty() -> Self {
        DecodeState {
            allow_empty: true,
            ..Self::default()
        }
    }

    /// Replays `decisions` from the start.
    pub fn replay(decisions: &[Token], allow_empty: bool) -> Self {
        let mut s = DecodeState {
            allow_empty,
            ..Self::default()
        };
        for &d in decisions {
            s.push(d);
        }
        s
    }

    pub fn history(&self) -> &[Token] {
        &self.history
    }

    pub fn decisions(&self) -> &[Token] {
        &self.decisions
    }

    pub fn current_vertex(&self) -> Option<usize> {
        self.current_vertex
    }

    pub fn previous_vertex(&self) -> Option<usize> {
        self.previous_vertex
    }

    /// First vertex of the open chain.
    pub fn chain_start(&self) -> Option<usize> {
        self.chain_start
    }

    /// Vertices emitted since the last EOC.
    pub fn chain_position(&self) -> usize {
        self.chain_position
    }

    pub fn chains_closed(&self) -> usize {
        self.chains_closed
    }

    pub fn allow_empty(&self) -> bool {
        self.allow_empty
    }

    pub fn is_terminal(&self) -> bool {
        self.history.last() == Some(&Token::Eos)
    }

    pub fn at_chain_start(&self) -> bool {
        matches!(self.history.last(), None | Some(Token::Eoc))
    }

    /// Applies one sampled decision. EOS after a vertex also closes the chain.
    pub fn push(&mut self, decision: Token) {
        self.decisions.push(decision);
        match decision {
            Token::Vertex(v) => {
                self.previous_vertex = self.current_vertex;
                self.current_vertex = Some(v);
                if self.chain_position == 0 {
                    self.chain_start = Some(v);
                }
                self.chain_position += 1;
                self.history.push(decision);
            }
            Token::Eoc => {
                self.close_chain();
            }
            Token::Eos => {
                if self.current_vertex.is_some() {
                    self.close_chain();
                }
                self.history.push(Token::Eos);
            }
        }
    }

    fn close_chain(&mut self) {
        self.history.push(Token::Eoc);
        self.current_vertex = None;
        self.previous_vertex = None;
        self.chain_start = None;
        self.chain_position = 0;
        self.chains_closed += 1;
    }
}

/// Collapses a token stream into the decisions that produce it: an `EOC`
/// directly followed by `EOS` was a single EOS decision.
pub fn decisions_of(tokens: &TokenSequence) -> Vec<Token> {
    let t = &tokens.tokens;
    let mut out = Vec::with_capacity(t.len());
    for (i, &tok) in t.iter().enumerate() {
        if tok == Token::Eoc && t.get(i + 1) == Some(&Token::Eos) && i > 0 {
            continue;
        }
        out.push(tok);
    }
    out
}

/// Allowed-candidate flags, indexed by candidate id.
pub fn candidate_mask(state: &DecodeState, adjacency: &AdjacencyTable) -> Vec<bool> {
    let n = adjacency.vertex_count();
    let mut mask = vec![false; n + Token::VERTEX_OFFSET];
    if state.is_terminal() {
        return mask;
    }
    match state.current_vertex() {
        None => {
            for m in &mut mask[Token::VERTEX_OFFSET..] {
                *m = true;
            }
            if state.history().is_empty() && state.allow_empty() {
                mask[Token::EOS_ID] = true;
            }
        }
        Some(v) => {
            for &u in adjacency.neighbors(v) {
                if Some(u) != state.previous_vertex() {
                    mask[u + Token::VERTEX_OFFSET] = true;
                }
            }
            mask[Token::EOC_ID] = true;
            mask[Token::EOS_ID] = true;
        }
    }
    mask
}

/// Temperature softmax over allowed candidates; disallowed entries are exactly 0.
pub fn masked_softmax(logits: &[f64], mask: &[bool], temperature: f64) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l / temperature)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l / temperature - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        for p in &mut probs {
            *p /= total;
        }
    }
    probs
}

/// Highest allowed logit, lowest candidate id on ties.
pub fn masked_argmax(logits: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (&l, &m)) in logits.iter().zip(mask).enumerate() {
        if m && best.map_or(true, |b| l > logits[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodeConfig {
    pub temperature: f64,
    pub max_len: usize,
    pub seed: u64,
    pub greedy: bool,
    pub allow_empty: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            temperature: 0.1,
            max_len: 400,
            seed: 0,
            greedy: false,
            allow_empty: false,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.max_len < 2 {
            return Err(Error::Config(format!(
                "max_len must be >= 2, got {}",
                self.max_len
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodedChain {
    #[serde(flatten)]
    pub chain: SeamChain,
    /// Log-probability of the decisions that produced the source walk.
    pub log_prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeOutput {
    /// Recorded token stream, including walks later dropped from `chains`.
    pub tokens: TokenSequence,
    pub chains: ChainSet,
    pub log_probs: Vec<f64>,
    pub truncated: bool,
}

impl DecodeOutput {
    pub fn to_json(&self) -> String {
        decode_json(
            &self.chains,
            &self.log_probs,
            self.truncated,
            false,
            Some(&self.tokens),
            &[],
        )
    }
}

pub(crate) fn decode_json(
    chains: &ChainSet,
    log_probs: &[f64],
    truncated: bool,
    depth_capped: bool,
    tokens: Option<&TokenSequence>,
    submeshes: &[dc::SubMeshRecord],
) -> String {
    #[derive(Serialize)]
    struct Wire<'a> {
        schema: &'a str,
        chains: Vec<DecodedChain>,
        truncated: bool,
        depth_capped: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        tokens: Option<Vec<usize>>,
        #[serde(skip_serializing_if = "<[_]>::is_empty")]
        submeshes: &'a [dc::SubMeshRecord],
    }
    let chains = chains
        .chains()
        .iter()
        .zip(log_probs)
        .map(|(c, &lp)| DecodedChain {
            chain: c.clone(),
            log_prob: lp,
        })
        .collect();
    serde_json::to_string_pretty(&Wire {
        schema: DECODE_SCHEMA,
        chains,
        truncated,
        depth_capped,
        tokens: tokens.map(TokenSequence::candidate_ids),
        submeshes,
    })
    .expect("decode output serializes")
}

/// A walk as sampled, before edge deduplication.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct RawChain {
    pub vertices: Vec<usize>,
    pub log_prob: f64,
}

pub(crate) enum StepEvent {
    Continue,
    ChainClosed,
    Finished,
}

/// Incremental decoder; [`decode`] drives it to completion.
pub(crate) struct Session<'a> {
    ctx: MeshContext<'a>,
    config: &'a DecodeConfig,
    rng: ChaCha8Rng,
    pub state: DecodeState,
    pub raw: Vec<RawChain>,
    current: RawChain,
    pub truncated: bool,
}

impl<'a> Session<'a> {
    pub fn new(ctx: MeshContext<'a>, config: &'a DecodeConfig, seed: u64) -> Self {
        let state = if config.allow_empty {
            DecodeState::allowing_empty()
        } else {
            DecodeState::new()
        };
        Session {
            ctx,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state,
            raw: Vec::new(),
            current: RawChain::default(),
            truncated: false,
        }
    }

    fn apply(&mut self, decision: Token, log_p: f64) -> StepEvent {
        let was_open = self.state.current_vertex().is_some();
        self.state.push(decision);
        self.current.log_prob += log_p;
        match decision {
            Token::Vertex(v) => {
                self.current.vertices.push(v);
                StepEvent::Continue
            }
            Token::Eoc => {
                self.raw.push(std::mem::take(&mut self.current));
                StepEvent::ChainClosed
            }
            Token::Eos => {
                if was_open {
                    self.raw.push(std::mem::take(&mut self.current));
                }
                StepEvent::Finished
            }
        }
    }

    pub fn step(&mut self, scorer: &mut dyn Scorer) -> Result<StepEvent> {
        if self.state.is_terminal() {
            return Ok(StepEvent::Finished);
        }
        if self.state.history().len() + 2 >= self.config.max_len {
            self.truncated = true;
            return Ok(self.apply(Token::Eos, 0.0));
        }
        let mask = candidate_mask(&self.state, self.ctx.adjacency);
        if !mask.iter().any(|&m| m) {
            let forced = if self.state.current_vertex().is_some() {
                Token::Eoc
            } else {
                Token::Eos
            };
            return Ok(self.apply(forced, 0.0));
        }
        let logits = scorer.score(&self.state, &self.ctx)?;
        if logits.len() != mask.len() {
            return Err(Error::ScorerShape {
                got: logits.len(),
                expected: mask.len(),
            });
        }
        let probs = masked_softmax(&logits, &mask, self.config.temperature);
        let pick = if self.config.greedy {
            masked_argmax(&logits, &mask).expect("mask is non-empty")
        } else {
            sample(&probs, &mask, &mut self.rng)
        };
        Ok(self.apply(Token::from_candidate(pick), probs[pick].ln()))
    }

    pub fn run(&mut self, scorer: &mut dyn Scorer) -> Result<()> {
        while !matches!(self.step(scorer)?, StepEvent::Finished) {}
        Ok(())
    }
}

fn sample(probs: &[f64], mask: &[bool], rng: &mut impl Rng) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, (&p, &m)) in probs.iter().zip(mask).enumerate() {
        if !m {
            continue;
        }
        last = i;
        acc += p;
        if r < acc {
            return i;
        }
    }
    last
}

/// Turns sampled walks into an edge-disjoint chain set. A walk is split
/// wherever it would reuse an edge already claimed; single-vertex pieces are
/// dropped.
pub(crate) fn sanitize(raw: &[RawChain]) -> (ChainSet, Vec<f64>) {
    let mut used: BTreeSet<Edge> = BTreeSet::new();
    let mut chains = Vec::new();
    let mut log_probs = Vec::new();
    for walk in raw {
        let mut piece: Vec<usize> = Vec::new();
        let mut flush = |piece: &mut Vec<usize>| {
            if piece.len() >= 2 {
                chains.push(SeamChain::new(std::mem::take(piece)).expect("piece has fresh edges"));
                log_probs.push(walk.log_prob);
            } else {
                piece.clear();
            }
        };
        for &v in &walk.vertices {
            match piece.last() {
                None => piece.push(v),
                Some(&u) => {
                    if u != v && used.insert(Edge::new(u, v)) {
                        piece.push(v);
                    } else {
                        flush(&mut piece);
                        piece.push(v);
                    }
                }
            }
        }
        flush(&mut piece);
    }
    (
        ChainSet::new(chains).expect("sanitized chains are edge-disjoint"),
        log_probs,
    )
}

/// Samples a full seam stream from `scorer`.
pub fn decode(
    mesh: &Mesh,
    adjacency: &AdjacencyTable,
    scorer: &mut dyn Scorer,
    config: &DecodeConfig,
) -> Result<DecodeOutput> {
    config.validate()?;
    let ctx = MeshContext { mesh, adjacency };
    let mut session = Session::new(ctx, config, config.seed);
    session.run(scorer)?;
    let (chains, log_probs) = sanitize(&session.raw);
    Ok(DecodeOutput {
        tokens: TokenSequence::new(session.state.history().to_vec()),
        chains,
        log_probs,
        truncated: session.truncated,
    })
}
