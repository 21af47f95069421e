use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::{Cell, RefCell};
use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::rc::Rc;
use std::sync::atomic::{AtomicIsize, Ordering};

use edprof::summary::summarize_for_row;
use edprof::{
    read_stream, summarize_stream, write_stream, ManifestRow, PositionRecord, RecordValues,
    StdConvention, StreamError, StreamHeader, StreamReader, StreamWriter, SummarizeOptions,
    ValueKind, ValueWidth,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counts live heap bytes and their peak while tracking is on for the
/// current thread.
struct Accounting;

static LIVE: AtomicIsize = AtomicIsize::new(0);
static PEAK: AtomicIsize = AtomicIsize::new(0);

thread_local! {
    static TRACKING: Cell<bool> = const { Cell::new(false) };
}

fn tracking() -> bool {
    TRACKING.try_with(|t| t.get()).unwrap_or(false)
}

unsafe impl GlobalAlloc for Accounting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() && tracking() {
            let now = LIVE.fetch_add(layout.size() as isize, Ordering::SeqCst) + layout.size() as isize;
            PEAK.fetch_max(now, Ordering::SeqCst);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        if tracking() {
            LIVE.fetch_sub(layout.size() as isize, Ordering::SeqCst);
        }
        unsafe { System.dealloc(ptr, layout) }
    }
}

#[global_allocator]
static GLOBAL: Accounting = Accounting;

/// Produces a logit stream lazily, one record at a time, with its own
/// allocations excluded from the accounting.
struct LazyStream {
    queue: Rc<RefCell<VecDeque<u8>>>,
    writer: Option<StreamWriter<QueueSink>>,
    values: Vec<f32>,
    next: u32,
    records: u32,
    rng: ChaCha8Rng,
}

struct QueueSink(Rc<RefCell<VecDeque<u8>>>);

impl Write for QueueSink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.borrow_mut().extend(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl LazyStream {
    fn new(vocab: u32, records: u32) -> Self {
        let queue = Rc::new(RefCell::new(VecDeque::new()));
        let header = StreamHeader::new(vocab, ValueKind::RawLogits, ValueWidth::Binary32);
        let writer = StreamWriter::new(header, QueueSink(queue.clone())).unwrap();
        LazyStream {
            queue,
            writer: Some(writer),
            values: vec![0.0; vocab as usize],
            next: 0,
            records,
            rng: ChaCha8Rng::seed_from_u64(3),
        }
    }

    fn produce(&mut self) {
        let Some(writer) = self.writer.as_mut() else { return };
        if self.next < self.records {
            for v in self.values.iter_mut() {
                *v = self.rng.random_range(-4.0..4.0);
            }
            let token = self.rng.random_range(0..self.values.len() as u32);
            writer.write_values(self.next, token, &self.values).unwrap();
            self.next += 1;
        } else {
            self.writer.take().unwrap().finish().unwrap();
        }
    }
}

impl Read for LazyStream {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let was = TRACKING.with(|t| t.replace(false));
        while self.queue.borrow().is_empty() && self.writer.is_some() {
            self.produce();
        }
        let mut q = self.queue.borrow_mut();
        let n = buf.len().min(q.len());
        for (dst, src) in buf.iter_mut().zip(q.drain(..n)) {
            *dst = src;
        }
        if q.capacity() > 4 * (n + 1) && q.is_empty() {
            q.shrink_to_fit();
        }
        drop(q);
        TRACKING.with(|t| t.set(was));
        Ok(n)
    }
}

fn peak_for(vocab: u32, records: u32) -> isize {
    let mut source = LazyStream::new(vocab, records);
    LIVE.store(0, Ordering::SeqCst);
    PEAK.store(0, Ordering::SeqCst);
    TRACKING.with(|t| t.set(true));
    let summary = {
        let mut reader = StreamReader::new(&mut source).unwrap();
        summarize_stream(&mut reader, SummarizeOptions::at_temperature(1.0)).unwrap()
    };
    TRACKING.with(|t| t.set(false));
    assert_eq!(summary.length, records);
    PEAK.load(Ordering::SeqCst)
}

#[test]
fn summarization_memory_is_bounded_by_vocabulary() {
    let vocab = 152_064u32;
    let record_bytes = vocab as isize * 4;
    let bitset = (vocab as usize).div_ceil(8) as isize;
    let slack = 64 * 1024;
    let peak_500 = peak_for(vocab, 500);
    assert!(
        peak_500 <= 2 * record_bytes + bitset + slack,
        "peak {peak_500} bytes exceeds bound {}",
        2 * record_bytes + bitset + slack
    );
    // independent of sequence length
    let peak_20 = peak_for(vocab, 20);
    assert_eq!(peak_20, peak_500);
}

fn sample_records(width: ValueWidth, vocab: usize, n: u32, seed: u64) -> Vec<PositionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let values = match width {
                ValueWidth::Binary32 => {
                    RecordValues::F32((0..vocab).map(|_| rng.random_range(-30.0..30.0)).collect())
                }
                ValueWidth::Binary64 => {
                    RecordValues::F64((0..vocab).map(|_| rng.random_range(-30.0..30.0)).collect())
                }
            };
            PositionRecord {
                position_index: i,
                sampled_token_id: rng.random_range(0..vocab as u32),
                values,
            }
        })
        .collect()
}

fn encode(header: &StreamHeader, records: &[PositionRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    write_stream(header.clone(), records, &mut out).unwrap();
    out
}

#[test]
fn round_trip_is_bit_exact() {
    for width in [ValueWidth::Binary32, ValueWidth::Binary64] {
        let header = StreamHeader::new(97, ValueKind::RawLogits, width)
            .with_generation_id("model#12")
            .with_digest([1, 2, 3, 4, 5, 6, 7, 8])
            .with_position_count_hint(40);
        let records = sample_records(width, 97, 40, 11);
        let bytes = encode(&header, &records);
        let (h, recs) = read_stream(&bytes[..]).unwrap();
        let back: Vec<PositionRecord> = recs.collect::<Result<_, _>>().unwrap();
        assert_eq!(h, header);
        assert_eq!(back.len(), records.len());
        for (a, b) in back.iter().zip(&records) {
            assert_eq!(a.position_index, b.position_index);
            assert_eq!(a.sampled_token_id, b.sampled_token_id);
            for i in 0..97 {
                assert_eq!(a.values.get(i).to_bits(), b.values.get(i).to_bits());
            }
        }
        assert_eq!(encode(&h, &back), bytes);
    }
}

#[test]
fn every_truncation_is_a_truncation_error() {
    let header = StreamHeader::new(8, ValueKind::RawLogits, ValueWidth::Binary32).with_generation_id("g");
    let bytes = encode(&header, &sample_records(ValueWidth::Binary32, 8, 5, 1));
    for cut in 0..bytes.len() {
        let result = StreamReader::new(&bytes[..cut]).and_then(|r| r.verify());
        match result {
            Err(StreamError::Truncated { offset, .. }) => assert_eq!(offset, cut as u64),
            other => panic!("cut at {cut}: {other:?}"),
        }
    }
}

#[test]
fn single_byte_corruption_never_passes() {
    let header = StreamHeader::new(16, ValueKind::RawLogits, ValueWidth::Binary64).with_generation_id("x");
    let bytes = encode(&header, &sample_records(ValueWidth::Binary64, 16, 6, 2));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for pos in 0..bytes.len() {
        let mut bad = bytes.clone();
        bad[pos] ^= 1 << rng.random_range(0..8);
        let result = StreamReader::new(&bad[..]).and_then(|r| r.verify());
        assert!(result.is_err(), "flip at {pos} went unnoticed");
    }
    // a flipped logit bit is caught by the checksum specifically
    let mut bad = bytes.clone();
    let first_value = bytes.len() - 8 - 8 - 8 * 16;
    bad[first_value] ^= 0x10;
    assert!(matches!(
        StreamReader::new(&bad[..]).and_then(|r| r.verify()),
        Err(StreamError::ChecksumMismatch { .. })
    ));
}

#[test]
fn distinct_typed_errors() {
    let header = StreamHeader::new(4, ValueKind::RawLogits, ValueWidth::Binary32);
    let mut w = StreamWriter::new(header.clone(), Vec::new()).unwrap();
    assert!(matches!(
        w.write_values(0, 0, &[0.0f64; 4]),
        Err(StreamError::WidthMismatch { .. })
    ));
    assert!(matches!(
        w.write_values(0, 0, &[0.0f32; 3]),
        Err(StreamError::WidthMismatch { .. })
    ));
    w.write_values(0, 0, &[0.0f32; 4]).unwrap();
    assert!(matches!(
        w.write_values(0, 0, &[0.0f32; 4]),
        Err(StreamError::NonMonotonePosition { .. })
    ));
    assert!(matches!(
        w.write_values(1, 4, &[0.0f32; 4]),
        Err(StreamError::TokenOutOfRange { .. })
    ));
    assert!(matches!(
        w.write_values(1, 0, &[0.0f32, f32::NAN, 0.0, 0.0]),
        Err(StreamError::NonFinite { .. })
    ));

    let good = encode(&header, &sample_records(ValueWidth::Binary32, 4, 2, 3));
    let mut magic = good.clone();
    magic[0] = b'X';
    assert!(matches!(StreamReader::new(&magic[..]), Err(StreamError::BadMagic { .. })));
    let mut version = good.clone();
    version[4] = 9;
    assert!(matches!(
        StreamReader::new(&version[..]),
        Err(StreamError::UnsupportedVersion(9))
    ));
    let mut trailing = good.clone();
    trailing.push(0);
    assert!(matches!(
        StreamReader::new(&trailing[..]).and_then(|r| r.verify()),
        Err(StreamError::TrailingData { .. })
    ));
}

fn row(vocab: u32) -> ManifestRow {
    ManifestRow {
        model_name: "m".into(),
        architecture: edprof::Architecture::Transformer,
        param_count: 1,
        vocab_size: vocab,
        prompt_category: edprof::PromptCategory::Code,
        prompt_text_ref: "code/EN/0".into(),
        language: edprof::Language::En,
        temperature: 1.0,
        seed: 0,
        generation_index: 0,
        stream_path: "s.edls".into(),
        prompt_token_count: None,
        prompt_char_count: None,
        quantization: None,
        chat_template: None,
    }
}

#[test]
fn manifest_binding_mismatches() {
    use edprof::summary::SummarizeError;
    let r = row(4);
    let bound = StreamHeader::new(4, ValueKind::RawLogits, ValueWidth::Binary32).with_digest(r.digest());
    let bytes = encode(&bound, &sample_records(ValueWidth::Binary32, 4, 3, 5));
    assert!(summarize_for_row(&bytes[..], &r, StdConvention::Sample).is_ok());
    let mut other = r.clone();
    other.seed = 1;
    assert!(matches!(
        summarize_for_row(&bytes[..], &other, StdConvention::Sample),
        Err(SummarizeError::DigestMismatch)
    ));
    assert!(matches!(
        summarize_for_row(&bytes[..], &row(5), StdConvention::Sample),
        Err(SummarizeError::VocabMismatch { .. })
    ));
}
