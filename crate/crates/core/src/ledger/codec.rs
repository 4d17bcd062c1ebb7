//! Byte-exact canonical encoding of records and block headers.
//!
//! Integers are fixed-width big-endian, reals are IEEE-754 bit patterns,
//! strings are a u32 length followed by UTF-8 bytes, booleans one byte.

use sha2::{Digest as _, Sha256};

use super::{Channel, Digest, LedgerError, TransactionRecord};
use crate::adversary::AuditReport;

pub(crate) fn sha256(bytes: &[u8]) -> Digest {
    let mut out = [0u8; 32];
    out.copy_from_slice(&Sha256::digest(bytes));
    out
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn i8(&mut self, v: i8) {
        self.0.push(v as u8);
    }
    fn bool(&mut self, v: bool) {
        self.0.push(v as u8);
    }
    fn str(&mut self, s: &str) {
        self.0.extend_from_slice(&(s.len() as u32).to_be_bytes());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LedgerError> {
        if self.bytes.len() - self.pos < n {
            return Err(LedgerError::Decode("truncated payload".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32, LedgerError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, LedgerError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, LedgerError> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn i8(&mut self) -> Result<i8, LedgerError> {
        Ok(self.take(1)?[0] as i8)
    }
    fn bool(&mut self) -> Result<bool, LedgerError> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(LedgerError::Decode(format!("invalid bool byte {b}"))),
        }
    }
    fn str(&mut self) -> Result<String, LedgerError> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|e| LedgerError::Decode(e.to_string()))
    }
}

fn write_record(w: &mut Writer, r: &TransactionRecord) {
    w.u64(r.iteration_id);
    w.u64(r.task_id);
    w.str(&r.worker_id);
    w.u64(r.jobs_executed);
    w.u64(r.task_jobs);
    w.f64(r.speed_gain);
    w.u64(r.steal_chunk_size);
    w.str(&r.location);
    w.i8(r.lambda);
    w.f64(r.task_complexity);
    w.u64(r.timestamp);
    w.str(&r.audit.device_id);
    w.bool(r.audit.count_mismatch);
    w.bool(r.audit.id_fabrication);
    w.u64(r.audit.incomplete_chunks);
    w.u64(r.audit.deadline_violations);
}

fn read_record(r: &mut Reader<'_>) -> Result<TransactionRecord, LedgerError> {
    Ok(TransactionRecord {
        iteration_id: r.u64()?,
        task_id: r.u64()?,
        worker_id: r.str()?,
        jobs_executed: r.u64()?,
        task_jobs: r.u64()?,
        speed_gain: r.f64()?,
        steal_chunk_size: r.u64()?,
        location: r.str()?,
        lambda: r.i8()?,
        task_complexity: r.f64()?,
        timestamp: r.u64()?,
        audit: AuditReport {
            device_id: r.str()?,
            count_mismatch: r.bool()?,
            id_fabrication: r.bool()?,
            incomplete_chunks: r.u64()?,
            deadline_violations: r.u64()?,
        },
    })
}

pub fn encode_record(record: &TransactionRecord) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    write_record(&mut w, record);
    w.0
}

/// Block payload: u32 record count, then each record.
pub fn encode_payload(records: &[TransactionRecord]) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(&(records.len() as u32).to_be_bytes());
    for r in records {
        write_record(&mut w, r);
    }
    w.0
}

pub fn decode_payload(bytes: &[u8]) -> Result<Vec<TransactionRecord>, LedgerError> {
    let mut r = Reader { bytes, pos: 0 };
    let n = r.u32()? as usize;
    let mut out = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        out.push(read_record(&mut r)?);
    }
    if r.pos != bytes.len() {
        return Err(LedgerError::Decode("trailing bytes after payload".into()));
    }
    Ok(out)
}

/// Digest of a block header: height, channel tag, previous hash and the
/// payload digest.
pub fn header_hash(height: u64, channel: Channel, prev_hash: &Digest, payload_hash: &Digest) -> Digest {
    let mut bytes = Vec::with_capacity(8 + 1 + 64);
    bytes.extend_from_slice(&height.to_be_bytes());
    bytes.push(channel.tag());
    bytes.extend_from_slice(prev_hash);
    bytes.extend_from_slice(payload_hash);
    sha256(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_record() -> impl Strategy<Value = TransactionRecord> {
        (
            (any::<u64>(), any::<u64>(), "[a-z0-9é]{0,12}", any::<u64>(), any::<u64>()),
            (any::<f64>(), any::<u64>(), "[ -~]{0,8}", any::<i8>(), any::<f64>(), any::<u64>()),
            (any::<bool>(), any::<bool>(), any::<u64>(), any::<u64>()),
        )
            .prop_map(|((it, task, w, jobs, tj), (s, chunk, loc, l, c, ts), (cm, fab, inc, dv))| {
                TransactionRecord {
                    iteration_id: it,
                    task_id: task,
                    worker_id: w.clone(),
                    jobs_executed: jobs,
                    task_jobs: tj,
                    speed_gain: s,
                    steal_chunk_size: chunk,
                    location: loc,
                    lambda: l,
                    task_complexity: c,
                    timestamp: ts,
                    audit: AuditReport {
                        device_id: w,
                        count_mismatch: cm,
                        id_fabrication: fab,
                        incomplete_chunks: inc,
                        deadline_violations: dv,
                    },
                }
            })
    }

    proptest! {
        #[test]
        fn payload_round_trips_bit_exact(records in prop::collection::vec(arb_record(), 0..4)) {
            let bytes = encode_payload(&records);
            let back = decode_payload(&bytes).unwrap();
            prop_assert_eq!(encode_payload(&back), bytes);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_payload(&[0, 0, 0, 1, 0]).is_err());
        let mut bytes = encode_payload(&[]);
        bytes.push(0);
        assert!(decode_payload(&bytes).is_err());
    }

    #[test]
    fn integers_are_big_endian() {
        let bytes = encode_payload(&[]);
        assert_eq!(bytes, vec![0, 0, 0, 0]);
        let h = header_hash(1, Channel::Delegator, &[0; 32], &[0; 32]);
        let mut manual = vec![0, 0, 0, 0, 0, 0, 0, 1, 0];
        manual.extend_from_slice(&[0; 64]);
        assert_eq!(h, sha256(&manual));
    }
}
