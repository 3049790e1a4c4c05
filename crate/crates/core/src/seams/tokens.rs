use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::AdjacencyTable;

use super::{ChainSet, SeamChain};

/// One symbol of the seam stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "TokenWire", try_from = "TokenWire")]
pub enum Token {
    /// End of the current chain.
    Eoc,
    /// End of the whole sequence.
    Eos,
    Vertex(usize),
}

impl Token {
    pub const EOC_ID: usize = 0;
    pub const EOS_ID: usize = 1;
    /// Candidate ids of vertices are shifted past the two specials.
    pub const VERTEX_OFFSET: usize = 2;

    pub fn candidate_id(self) -> usize {
        match self {
            Token::Eoc => Self::EOC_ID,
            Token::Eos => Self::EOS_ID,
            Token::Vertex(v) => v + Self::VERTEX_OFFSET,
        }
    }

    pub fn from_candidate(id: usize) -> Token {
        match id {
            Self::EOC_ID => Token::Eoc,
            Self::EOS_ID => Token::Eos,
            v => Token::Vertex(v - Self::VERTEX_OFFSET),
        }
    }

    pub fn vertex(self) -> Option<usize> {
        match self {
            Token::Vertex(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "t")]
enum TokenWire {
    #[serde(rename = "v")]
    V { i: usize },
    #[serde(rename = "eoc")]
    Eoc,
    #[serde(rename = "eos")]
    Eos,
}

impl From<Token> for TokenWire {
    fn from(t: Token) -> Self {
        match t {
            Token::Eoc => TokenWire::Eoc,
            Token::Eos => TokenWire::Eos,
            Token::Vertex(i) => TokenWire::V { i },
        }
    }
}

impl TryFrom<TokenWire> for Token {
    type Error = std::convert::Infallible;

    fn try_from(w: TokenWire) -> std::result::Result<Self, Self::Error> {
        Ok(match w {
            TokenWire::Eoc => Token::Eoc,
            TokenWire::Eos => Token::Eos,
            TokenWire::V { i } => Token::Vertex(i),
        })
    }
}

pub const TOKENS_SCHEMA: &str = "seamforge.tokens/1";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<Token>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<Token>) -> Self {
        TokenSequence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn candidate_ids(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.candidate_id()).collect()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a> {
            schema: &'a str,
            tokens: &'a [Token],
        }
        serde_json::to_string_pretty(&Wire {
            schema: TOKENS_SCHEMA,
            tokens: &self.tokens,
        })
        .expect("tokens serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Each chain's vertices followed by EOC, then a final EOS.
pub fn tokenize(chains: &ChainSet) -> TokenSequence {
    let mut tokens = Vec::with_capacity(chains.edge_count() + 2 * chains.len() + 1);
    for c in chains.chains() {
        tokens.extend(c.vertices().iter().map(|&v| Token::Vertex(v)));
        tokens.push(Token::Eoc);
    }
    tokens.push(Token::Eos);
    TokenSequence { tokens }
}

/// Inverse of [`tokenize`]. A final chain closed directly by EOS (without a
/// preceding EOC) is also accepted.
pub fn detokenize(seq: &TokenSequence, adjacency: &AdjacencyTable) -> Result<ChainSet> {
    let malformed = |position: usize, message: &str| Error::MalformedTokens {
        position,
        message: message.to_string(),
    };
    let mut chains = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut finished = false;
    for (pos, &tok) in seq.tokens.iter().enumerate() {
        if finished {
            return Err(malformed(pos, "token after EOS"));
        }
        match tok {
            Token::Vertex(v) => {
                if v >= adjacency.vertex_count() {
                    return Err(malformed(pos, &format!("vertex {v} out of range")));
                }
                if let Some(&prev) = current.last() {
                    if !adjacency.is_edge(prev, v) {
                        return Err(malformed(
                            pos,
                            &format!("vertices {prev} and {v} are not adjacent"),
                        ));
                    }
                }
                current.push(v);
            }
            Token::Eoc => {
                if current.is_empty() {
                    return Err(malformed(pos, "empty chain"));
                }
                chains.push(close_chain(std::mem::take(&mut current), pos)?);
            }
            Token::Eos => {
                if !current.is_empty() {
                    chains.push(close_chain(std::mem::take(&mut current), pos)?);
                }
                finished = true;
            }
        }
    }
    if !finished {
        return Err(malformed(seq.tokens.len(), "missing EOS"));
    }
    ChainSet::new(chains)
}

fn close_chain(vertices: Vec<usize>, pos: usize) -> Result<SeamChain> {
    SeamChain::new(vertices).map_err(|e| Error::MalformedTokens {
        position: pos,
        message: e.to_string(),
    })
}
