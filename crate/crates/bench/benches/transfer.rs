use std::hint::black_box;

use alchemist_core::layout::{DistPair, StridedRange};
use alchemist_core::protocol::{chunk_block, decode_frame, encode_frame, BlockMessage, ChunkView, ElemType};
use alchemist_core::{Client, Gateway, GatewayConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ndarray::Array2;

fn block(rows: usize, cols: usize) -> BlockMessage {
    BlockMessage {
        handle_id: 7,
        rows: StridedRange::new(0, 2, rows),
        cols: StridedRange::contiguous(0, cols),
        elem_type: ElemType::F64,
        elements: (0..rows * cols).map(|k| k as f64 * 0.25).collect(),
    }
}

fn framing(c: &mut Criterion) {
    let msg = block(500, 200);
    let mut group = c.benchmark_group("framing");
    group.throughput(Throughput::Bytes((msg.len() * 8) as u64));
    for buffer in [64usize << 10, 1 << 20] {
        group.bench_with_input(BenchmarkId::new("chunk_encode", buffer), &buffer, |b, &buffer| {
            b.iter(|| {
                let frames = chunk_block(&msg, 1, buffer).unwrap();
                frames.iter().map(|f| encode_frame(f, buffer).unwrap().len()).sum::<usize>()
            })
        });
        let wire: Vec<Vec<u8>> =
            chunk_block(&msg, 1, buffer).unwrap().iter().map(|f| encode_frame(f, buffer).unwrap()).collect();
        group.bench_with_input(BenchmarkId::new("decode_view", buffer), &wire, |b, wire| {
            b.iter(|| {
                let mut sum = 0.0;
                for bytes in wire {
                    let (frame, _) = decode_frame(black_box(bytes)).unwrap();
                    let view = ChunkView::parse(&frame.payload).unwrap();
                    sum += view.get(0);
                }
                sum
            })
        });
    }
    group.finish();
}

fn loopback(c: &mut Criterion) {
    let gateway = Gateway::start_any(GatewayConfig::new(4, 0)).unwrap();
    let a = Array2::from_shape_fn((1000, 200), |(i, j)| (i * 200 + j) as f64);
    let mut group = c.benchmark_group("send_matrix");
    group.throughput(Throughput::Bytes((a.len() * 8) as u64));
    group.sample_size(20);
    for pair in [DistPair::VC_STAR, DistPair::MC_MR] {
        let mut client = Client::connect_with_buffer(gateway.host(), gateway.port(), 1 << 20).unwrap();
        client.request_workers(4).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(pair), &pair, |b, &pair| {
            b.iter(|| client.send_matrix(&a, pair).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, framing, loopback);
criterion_main!(benches);
