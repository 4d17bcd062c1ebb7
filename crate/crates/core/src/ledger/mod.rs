//! Append-only, hash-chained ledger with two channels: a private delegator
//! channel carrying true job counts and a public worker channel carrying
//! noised counts. Writes made while disconnected are buffered and
//! committed in arrival order once the connection returns.
//!
//! Each channel starts with an empty genesis block at height 0 whose
//! `prev_hash` is all zeros. Every later block seals exactly one record.

pub mod codec;
#[cfg(any(test, feature = "test-backdoor"))]
mod tamper;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AuditReport;
use codec::{encode_payload, header_hash, sha256};

pub type Digest = [u8; 32];

pub const GENESIS_PREV: Digest = [0u8; 32];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LedgerError {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("ledger is not connected")]
    NotConnected,
    #[error("decode failure: {0}")]
    Decode(String),
    #[error("import failure at line {line}: {reason}")]
    Import { line: usize, reason: String },
    #[error("io failure: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    /// Private to delegators; true counts.
    Delegator,
    /// Public; Laplace-noised counts.
    Worker,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Delegator, Channel::Worker];

    pub fn tag(self) -> u8 {
        match self {
            Channel::Delegator => 0,
            Channel::Worker => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Delegator => "delegator",
            Channel::Worker => "worker",
        }
    }

    fn parse(s: &str) -> Option<Channel> {
        match s {
            "delegator" => Some(Channel::Delegator),
            "worker" => Some(Channel::Worker),
            _ => None,
        }
    }
}

/// Per-iteration statistics for one worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub iteration_id: u64,
    pub task_id: u64,
    pub worker_id: String,
    /// True count on the delegator channel, noised on the worker channel.
    pub jobs_executed: u64,
    /// Jobs in the whole task, used for the worker's fractional contribution.
    pub task_jobs: u64,
    pub speed_gain: f64,
    pub steal_chunk_size: u64,
    pub location: String,
    pub lambda: i8,
    pub task_complexity: f64,
    /// Logical clock.
    pub timestamp: u64,
    pub audit: AuditReport,
}

impl TransactionRecord {
    pub fn validate(&self) -> Result<(), LedgerError> {
        let bad = |m: &str| Err(LedgerError::InvalidRecord(m.to_string()));
        if self.lambda != 1 && self.lambda != -1 {
            return bad("lambda must be +1 or -1");
        }
        if self.worker_id.is_empty() {
            return bad("worker_id must be non-empty");
        }
        if !(self.speed_gain.is_finite() && self.speed_gain > 0.0) {
            return bad("speed_gain must be > 0");
        }
        if self.steal_chunk_size == 0 {
            return bad("steal_chunk_size must be ≥ 1");
        }
        if !(self.task_complexity.is_finite() && self.task_complexity > 0.0) {
            return bad("task_complexity must be > 0");
        }
        if self.task_jobs == 0 {
            return bad("task_jobs must be ≥ 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub height: u64,
    pub channel: Channel,
    pub prev_hash: Digest,
    pub payload_hash: Digest,
    pub records: Vec<TransactionRecord>,
}

impl Block {
    fn genesis(channel: Channel) -> Block {
        Block::seal(0, channel, GENESIS_PREV, Vec::new())
    }

    fn seal(height: u64, channel: Channel, prev_hash: Digest, records: Vec<TransactionRecord>) -> Block {
        let payload_hash = sha256(&encode_payload(&records));
        Block {
            height,
            channel,
            prev_hash,
            payload_hash,
            records,
        }
    }

    pub fn recomputed_payload_hash(&self) -> Digest {
        sha256(&encode_payload(&self.records))
    }

    /// Digest the next block must link to. Covers the records themselves,
    /// not just the stored payload digest.
    pub fn hash(&self) -> Digest {
        header_hash(self.height, self.channel, &self.prev_hash, &self.recomputed_payload_hash())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receipt {
    Buffered,
    Committed(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub height: u64,
    pub reason: &'static str,
}

#[derive(Debug, Clone)]
pub struct LedgerStore {
    chains: BTreeMap<Channel, Vec<Block>>,
    offline_buffer: Vec<(Channel, TransactionRecord)>,
    connected: bool,
}

impl Default for LedgerStore {
    fn default() -> Self {
        Self::new()
    }
}

impl LedgerStore {
    /// Connected store with a genesis block on each channel.
    pub fn new() -> Self {
        let chains = Channel::ALL
            .iter()
            .map(|&c| (c, vec![Block::genesis(c)]))
            .collect();
        LedgerStore {
            chains,
            offline_buffer: Vec::new(),
            connected: true,
        }
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn set_connected(&mut self, connected: bool) {
        self.connected = connected;
    }

    pub fn blocks(&self, channel: Channel) -> &[Block] {
        &self.chains[&channel]
    }

    pub fn height(&self, channel: Channel) -> u64 {
        self.blocks(channel).len() as u64 - 1
    }

    pub fn head_hash(&self, channel: Channel) -> Digest {
        self.blocks(channel).last().expect("genesis").hash()
    }

    pub fn buffered(&self) -> &[(Channel, TransactionRecord)] {
        &self.offline_buffer
    }

    fn commit(&mut self, channel: Channel, record: TransactionRecord) -> u64 {
        let prev = self.head_hash(channel);
        let chain = self.chains.get_mut(&channel).expect("channel");
        let height = chain.len() as u64;
        chain.push(Block::seal(height, channel, prev, vec![record]));
        height
    }

    pub fn append_transaction(
        &mut self,
        channel: Channel,
        record: TransactionRecord,
    ) -> Result<Receipt, LedgerError> {
        record.validate()?;
        if self.connected {
            Ok(Receipt::Committed(self.commit(channel, record)))
        } else {
            self.offline_buffer.push((channel, record));
            Ok(Receipt::Buffered)
        }
    }

    pub fn flush_offline_buffer(&mut self) -> Result<usize, LedgerError> {
        if !self.connected {
            return Err(LedgerError::NotConnected);
        }
        let pending = std::mem::take(&mut self.offline_buffer);
        let n = pending.len();
        for (channel, record) in pending {
            self.commit(channel, record);
        }
        Ok(n)
    }

    /// Recomputes every digest on the channel. An empty result means the
    /// chain is intact.
    pub fn verify_chain(&self, channel: Channel) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut prev = GENESIS_PREV;
        for (i, block) in self.blocks(channel).iter().enumerate() {
            let h = i as u64;
            if block.height != h {
                out.push(Violation { height: h, reason: "height" });
            }
            if block.channel != channel {
                out.push(Violation { height: h, reason: "channel" });
            }
            if block.prev_hash != prev {
                out.push(Violation { height: h, reason: "link" });
            }
            if block.recomputed_payload_hash() != block.payload_hash {
                out.push(Violation { height: h, reason: "payload" });
            }
            if h > 0 && block.records.is_empty() {
                out.push(Violation { height: h, reason: "empty" });
            }
            prev = block.hash();
        }
        out
    }

    pub fn verify_all(&self) -> Vec<(Channel, Violation)> {
        Channel::ALL
            .iter()
            .flat_map(|&c| self.verify_chain(c).into_iter().map(move |v| (c, v)))
            .collect()
    }

    /// Committed records for `worker_id` on one channel, oldest first.
    pub fn query_worker_history(&self, channel: Channel, worker_id: &str) -> Vec<&TransactionRecord> {
        self.blocks(channel)
            .iter()
            .flat_map(|b| b.records.iter())
            .filter(|r| r.worker_id == worker_id)
            .collect()
    }

    /// One line per block, channels in order:
    /// `channel \t height \t prev \t payload_hash \t block_hash \t payload`
    /// with digests and payload hex-encoded. Buffered records are not
    /// exported.
    pub fn export<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for channel in Channel::ALL {
            for block in self.blocks(channel) {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    channel.as_str(),
                    block.height,
                    hex::encode(block.prev_hash),
                    hex::encode(block.payload_hash),
                    hex::encode(block.hash()),
                    hex::encode(encode_payload(&block.records)),
                )?;
            }
        }
        Ok(())
    }

    /// Parses an exported file. Each line's block digest must match the
    /// block it describes; chain links are left for `verify_chain`.
    pub fn import<R: BufRead>(input: R) -> Result<LedgerStore, LedgerError> {
        let mut chains: BTreeMap<Channel, Vec<Block>> = BTreeMap::new();
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| LedgerError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |reason: String| LedgerError::Import { line: line_no, reason };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 6 {
                return Err(err(format!("expected 6 fields, found {}", fields.len())));
            }
            let channel = Channel::parse(fields[0]).ok_or_else(|| err("unknown channel".into()))?;
            let height: u64 = fields[1].parse().map_err(|_| err("bad height".into()))?;
            let digest = |s: &str| -> Result<Digest, LedgerError> {
                let raw = hex::decode(s).map_err(|e| err(e.to_string()))?;
                raw.try_into().map_err(|_| err("digest must be 32 bytes".into()))
            };
            let prev_hash = digest(fields[2])?;
            let payload_hash = digest(fields[3])?;
            let line_digest = digest(fields[4])?;
            let payload = hex::decode(fields[5]).map_err(|e| err(e.to_string()))?;
            let records = codec::decode_payload(&payload).map_err(|e| err(e.to_string()))?;
            let block = Block {
                height,
                channel,
                prev_hash,
                payload_hash,
                records,
            };
            if block.hash() != line_digest {
                return Err(err("block digest mismatch".into()));
            }
            chains.entry(channel).or_default().push(block);
        }
        for channel in Channel::ALL {
            if chains.get(&channel).is_none_or(|c| c.is_empty()) {
                return Err(LedgerError::Import {
                    line: 0,
                    reason: format!("missing {} channel", channel.as_str()),
                });
            }
        }
        Ok(LedgerStore {
            chains,
            offline_buffer: Vec::new(),
            connected: true,
        })
    }
}
