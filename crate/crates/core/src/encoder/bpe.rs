//! Byte-pair-style subword vocabulary over characters.
//!
//! Each lexeme is a word. Merges are learned greedily by pair frequency and
//! applied at encoding time in the order they were learned.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const MASK: u32 = 4;
pub const SPECIALS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "TokenizerData", into = "TokenizerData")]
pub struct SubwordTokenizer {
    pieces: Vec<String>,
    merges: Vec<(u32, u32)>,
    index: HashMap<String, u32>,
    /// pair -> (rank, merged id)
    ranks: HashMap<(u32, u32), (usize, u32)>,
}

#[derive(Serialize, Deserialize)]
struct TokenizerData {
    pieces: Vec<String>,
    merges: Vec<(u32, u32)>,
}

impl From<TokenizerData> for SubwordTokenizer {
    fn from(data: TokenizerData) -> Self {
        SubwordTokenizer::from_parts(data.pieces, data.merges)
    }
}

impl From<SubwordTokenizer> for TokenizerData {
    fn from(t: SubwordTokenizer) -> Self {
        TokenizerData {
            pieces: t.pieces,
            merges: t.merges,
        }
    }
}

impl SubwordTokenizer {
    fn from_parts(pieces: Vec<String>, merges: Vec<(u32, u32)>) -> Self {
        let index = pieces.iter().enumerate().map(|(i, p)| (p.clone(), i as u32)).collect::<HashMap<_, _>>();
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(rank, &(a, b))| {
                let merged = format!("{}{}", pieces[a as usize], pieces[b as usize]);
                ((a, b), (rank, index[&merged]))
            })
            .collect();
        SubwordTokenizer {
            pieces,
            merges,
            index,
            ranks,
        }
    }

    /// Learns up to `vocab_size` pieces (specials included) from word counts.
    /// Every character seen is kept, so the result can exceed a limit
    /// smaller than the alphabet.
    pub fn learn(words: &BTreeMap<String, u64>, vocab_size: usize) -> Self {
        let mut pieces: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, u32> = HashMap::new();
        for (i, p) in pieces.iter().enumerate() {
            index.insert(p.clone(), i as u32);
        }
        let mut chars: Vec<char> = words.keys().flat_map(|w| w.chars()).collect();
        chars.sort_unstable();
        chars.dedup();
        for c in chars {
            let s = c.to_string();
            if !index.contains_key(&s) {
                index.insert(s.clone(), pieces.len() as u32);
                pieces.push(s);
            }
        }

        let mut corpus: Vec<(Vec<u32>, u64)> = words
            .iter()
            .map(|(w, &n)| (w.chars().map(|c| index[&c.to_string()]).collect(), n))
            .filter(|(ids, _): &(Vec<u32>, u64)| ids.len() > 1)
            .collect();
        let mut merges = Vec::new();

        while pieces.len() < vocab_size {
            let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
            for (ids, n) in &corpus {
                for w in ids.windows(2) {
                    *counts.entry((w[0], w[1])).or_insert(0) += n;
                }
            }
            // highest count; ties go to the smallest pair of ids
            let best = counts
                .into_iter()
                .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
            let Some((pair, count)) = best else { break };
            if count < 2 {
                break;
            }
            let merged = format!("{}{}", pieces[pair.0 as usize], pieces[pair.1 as usize]);
            let id = match index.get(&merged) {
                Some(&id) => id,
                None => {
                    let id = pieces.len() as u32;
                    index.insert(merged.clone(), id);
                    pieces.push(merged);
                    id
                }
            };
            merges.push(pair);
            for (ids, _) in &mut corpus {
                apply_merge(ids, pair, id);
            }
            corpus.retain(|(ids, _)| ids.len() > 1);
        }
        Self::from_parts(pieces, merges)
    }

    pub fn vocab_size(&self) -> usize {
        self.pieces.len()
    }

    pub fn piece(&self, id: u32) -> &str {
        &self.pieces[id as usize]
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    /// Ids of the learned (non-special) pieces, for random replacement.
    pub fn first_regular_id(&self) -> u32 {
        SPECIALS.len() as u32
    }

    pub fn encode(&self, word: &str) -> Vec<u32> {
        let mut buf = [0u8; 4];
        let mut ids: Vec<u32> = word
            .chars()
            .map(|c| self.index.get(c.encode_utf8(&mut buf) as &str).copied().unwrap_or(UNK))
            .collect();
        loop {
            let best = ids
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0], w[1])).map(|&(rank, merged)| (rank, (w[0], w[1]), merged)))
                .min_by_key(|&(rank, ..)| rank);
            match best {
                Some((_, pair, merged)) => apply_merge(&mut ids, pair, merged),
                None => return ids,
            }
        }
    }
}

fn apply_merge(ids: &mut Vec<u32>, pair: (u32, u32), merged: u32) {
    if ids.len() < 2 {
        return;
    }
    let mut out = Vec::with_capacity(ids.len());
    let mut i = 0;
    while i < ids.len() {
        if i + 1 < ids.len() && ids[i] == pair.0 && ids[i + 1] == pair.1 {
            out.push(merged);
            i += 2;
        } else {
            out.push(ids[i]);
            i += 1;
        }
    }
    *ids = out;
}
