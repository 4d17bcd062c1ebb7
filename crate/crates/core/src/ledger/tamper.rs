//! Test-only hooks for corrupting committed blocks one bit at a time.
//!
//! A block exposes these flippable bits, in order: height (64), channel (1),
//! prev_hash (256), payload_hash (256), then for each record its numeric
//! fields at full width, the two audit flags, and the low 7 bits of every
//! ASCII byte of its strings.

use super::{Channel, LedgerStore, TransactionRecord};

const HEADER_BITS: u64 = 64 + 1 + 256 + 256;

fn string_bits(s: &str) -> u64 {
    s.bytes().filter(u8::is_ascii).count() as u64 * 7
}

fn record_bits(r: &TransactionRecord) -> u64 {
    // u64/f64 fields: iteration, task, jobs, task_jobs, speed_gain, chunk,
    // complexity, timestamp, incomplete, violations; plus lambda and flags.
    10 * 64 + 8 + 2 + string_bits(&r.worker_id) + string_bits(&r.location) + string_bits(&r.audit.device_id)
}

fn flip_in_string(s: &mut String, mut bit: u64) -> bool {
    let mut bytes = std::mem::take(s).into_bytes();
    let mut done = false;
    for b in bytes.iter_mut().filter(|b| b.is_ascii()) {
        if bit < 7 {
            *b ^= 1 << bit;
            done = true;
            break;
        }
        bit -= 7;
    }
    *s = String::from_utf8(bytes).expect("ascii flips keep utf-8 valid");
    done
}

fn flip_record_bit(r: &mut TransactionRecord, bit: u64) {
    let word = |v: &mut u64, b: u64| *v ^= 1 << b;
    let real = |v: &mut f64, b: u64| *v = f64::from_bits(v.to_bits() ^ (1 << b));
    let (slot, b) = (bit / 64, bit % 64);
    match slot {
        0 => return word(&mut r.iteration_id, b),
        1 => return word(&mut r.task_id, b),
        2 => return word(&mut r.jobs_executed, b),
        3 => return word(&mut r.task_jobs, b),
        4 => return real(&mut r.speed_gain, b),
        5 => return word(&mut r.steal_chunk_size, b),
        6 => return real(&mut r.task_complexity, b),
        7 => return word(&mut r.timestamp, b),
        8 => return word(&mut r.audit.incomplete_chunks, b),
        9 => return word(&mut r.audit.deadline_violations, b),
        _ => {}
    }
    let mut rest = bit - 640;
    if rest < 8 {
        r.lambda ^= 1 << rest;
        return;
    }
    rest -= 8;
    match rest {
        0 => return r.audit.count_mismatch = !r.audit.count_mismatch,
        1 => return r.audit.id_fabrication = !r.audit.id_fabrication,
        _ => rest -= 2,
    }
    for s in [&mut r.worker_id, &mut r.location, &mut r.audit.device_id] {
        let n = string_bits(s);
        if rest < n {
            assert!(flip_in_string(s, rest));
            return;
        }
        rest -= n;
    }
    panic!("record bit index out of range");
}

impl LedgerStore {
    /// Number of distinct single-bit corruptions available in a block.
    pub fn tamper_bit_count(&self, channel: Channel, height: u64) -> u64 {
        let block = &self.blocks(channel)[height as usize];
        HEADER_BITS + block.records.iter().map(record_bits).sum::<u64>()
    }

    /// Flips one bit of a committed block, bypassing every invariant.
    pub fn tamper_flip_bit(&mut self, channel: Channel, height: u64, bit: u64) {
        let block = &mut self.chains.get_mut(&channel).expect("channel")[height as usize];
        match bit {
            0..=63 => block.height ^= 1 << bit,
            64 => {
                block.channel = match block.channel {
                    Channel::Delegator => Channel::Worker,
                    Channel::Worker => Channel::Delegator,
                }
            }
            65..=320 => {
                let b = bit - 65;
                block.prev_hash[(b / 8) as usize] ^= 1 << (b % 8);
            }
            321..=576 => {
                let b = bit - 321;
                block.payload_hash[(b / 8) as usize] ^= 1 << (b % 8);
            }
            _ => {
                let mut rest = bit - HEADER_BITS;
                for r in &mut block.records {
                    let n = record_bits(r);
                    if rest < n {
                        return flip_record_bit(r, rest);
                    }
                    rest -= n;
                }
                panic!("bit index {bit} out of range");
            }
        }
    }
}
