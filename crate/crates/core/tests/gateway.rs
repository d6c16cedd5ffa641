use std::io::{Read, Write};
use std::net::TcpStream;

use alchemist_core::client::{BlockedSource, Client, RowPartitionedSource};
use alchemist_core::protocol::{
    BlockMessage, Command, ElemType, Frame, Handshake, HandshakeReply, Wire, DEFAULT_BUFFER_BYTES, HEADER_LEN,
};
use alchemist_core::server::{Endpoint, Gateway, GatewayConfig};
use alchemist_core::{DistPair, Error, ErrorCode, StridedRange, TaskValue};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gateway(n: usize) -> Gateway {
    Gateway::start_any(GatewayConfig::new(n, 0)).expect("start gateway")
}

fn client(g: &Gateway) -> Client {
    Client::connect(g.host(), g.port()).expect("connect")
}

fn random(m: usize, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0))
}

fn code(e: &Error) -> ErrorCode {
    e.code()
}

fn bitwise_eq(a: &Array2<f64>, b: &Array2<f64>) -> bool {
    a.dim() == b.dim() && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
}

#[test]
fn worker_allocation_scenario() {
    let g = gateway(9);
    let mut a = client(&g);
    let mut b = client(&g);
    let ra: Vec<u32> = a.request_workers(4).unwrap().iter().map(|w| w.rank).collect();
    let rb: Vec<u32> = b.request_workers(3).unwrap().iter().map(|w| w.rank).collect();
    assert_eq!(ra.len(), 4);
    assert_eq!(rb.len(), 3);
    assert!(ra.iter().all(|r| !rb.contains(r)));
    assert_eq!(g.free_workers(), 2);

    let mut c = client(&g);
    let err = c.request_workers(4).unwrap_err();
    assert_eq!(code(&err), ErrorCode::OutOfWorkers);
    assert!(g.pool_is_consistent());

    a.close().unwrap();
    assert_eq!(g.free_workers(), 6);
    assert_eq!(c.request_workers(4).unwrap().len(), 4);
    assert!(g.pool_is_consistent());

    let table = c.list_workers().unwrap();
    assert_eq!(table.workers.len(), 9);
    let held: usize = table.workers.iter().filter(|(_, s)| *s == c.session_id()).count();
    assert_eq!(held, 4);
}

#[test]
fn workers_listen_on_consecutive_ports() {
    let g = gateway(4);
    let ports: Vec<u16> = g.workers().iter().map(|w| w.port).collect();
    assert_eq!(ports, (1..=4).map(|k| g.port() + k).collect::<Vec<_>>());
}

#[test]
fn round_trip_every_pair_and_group_size() {
    let g = gateway(6);
    let mut seed = 0;
    for p in 1..=6 {
        let mut c = client(&g);
        c.request_workers(p).unwrap();
        for pair in DistPair::LEGAL {
            for &(m, n) in &[(1, 1), (7, 7), (13, 5), (200, 160)] {
                seed += 1;
                let a = random(m, n, seed);
                let h = c.send_matrix(&a, pair).unwrap();
                let back = c.fetch_matrix(&h).unwrap();
                assert!(bitwise_eq(&a, &back), "{pair} on {p} workers, {m}x{n}");
            }
        }
        c.close().unwrap();
    }
    assert_eq!(g.live_sessions(), 0);
}

#[test]
fn small_buffer_splits_into_many_frames() {
    let g = gateway(3);
    let mut c = Client::connect_with_buffer(g.host(), g.port(), 4096).unwrap();
    assert_eq!(c.buffer_bytes(), 4096);
    c.request_workers(3).unwrap();
    let a = random(120, 90, 5);
    c.reset_stats();
    let h = c.send_matrix(&a, DistPair::MC_MR).unwrap();
    let sent = c.data_stats();
    assert!(sent.frames_sent > 3);
    assert!(sent.max_frame_bytes <= 4096);
    let back = c.fetch_matrix(&h).unwrap();
    assert!(bitwise_eq(&a, &back));
    assert!(c.stats().max_frame_bytes <= 4096);
}

#[test]
fn blocked_and_partitioned_sources_match_dense_send() {
    let g = gateway(4);
    let mut c = client(&g);
    c.request_workers(4).unwrap();
    let a = random(37, 23, 9);
    for pair in DistPair::LEGAL {
        let blocked = BlockedSource::from_dense("A", &a, 10, 7);
        let h = c.send_blocked(&blocked, pair).unwrap();
        assert!(bitwise_eq(&a, &c.fetch_matrix(&h).unwrap()), "blocked {pair}");
        let parts = RowPartitionedSource::from_dense(&a, 5);
        let h = c.send_partitioned(&parts, pair).unwrap();
        assert!(bitwise_eq(&a, &c.fetch_matrix(&h).unwrap()), "partitioned {pair}");
    }
}

#[test]
fn invalid_sources_are_rejected_before_sending() {
    let g = gateway(2);
    let mut c = client(&g);
    c.request_workers(2).unwrap();
    let a = random(8, 8, 1);
    let mut blocked = BlockedSource::from_dense("A", &a, 4, 4);
    blocked.chunks.remove(&(1, 1));
    assert_eq!(code(&c.send_blocked(&blocked, DistPair::VC_STAR).unwrap_err()), ErrorCode::InvalidSource);
    let mut parts = RowPartitionedSource::from_dense(&a, 3);
    parts.partitions[1].0 = 2..6;
    assert_eq!(code(&c.send_partitioned(&parts, DistPair::VC_STAR).unwrap_err()), ErrorCode::InvalidSource);
}

#[test]
fn f32_storage_rounds_values() {
    let g = gateway(2);
    let mut c = client(&g);
    c.request_workers(2).unwrap();
    let a = random(9, 4, 3);
    let h = c.send_matrix_as(&a, DistPair::VR_STAR, ElemType::F32).unwrap();
    let back = c.fetch_matrix(&h).unwrap();
    assert_eq!(back, a.mapv(|x| x as f32 as f64));
}

#[test]
fn interleaved_rows_accept_owner_and_reject_neighbour() {
    let g = gateway(10);
    let mut c = client(&g);
    c.request_workers(10).unwrap();
    let created = c.create_matrix(100, 3, DistPair::VC_STAR, ElemType::F64).unwrap();
    let h = created.info.id;
    let block = |rows: StridedRange| BlockMessage {
        handle_id: h,
        rows,
        cols: StridedRange::contiguous(0, 3),
        elem_type: ElemType::F64,
        elements: vec![1.0; rows.count * 3],
    };
    // rows 3, 13, ..., 93 belong to rank 3
    let mine = StridedRange::new(3, 10, 10);
    assert_eq!(c.send_block(3, &block(mine)).unwrap(), 30);
    let err = c.send_block(4, &block(mine)).unwrap_err();
    assert_eq!(code(&err), ErrorCode::OwnershipViolation);
    assert_eq!(c.send_block(5, &block(StridedRange::new(5, 10, 0))).unwrap(), 0);
}

#[test]
fn fetch_before_completion_is_not_ready() {
    let g = gateway(2);
    let mut c = client(&g);
    c.request_workers(2).unwrap();
    let info = c.create_matrix(4, 4, DistPair::VC_STAR, ElemType::F64).unwrap().info;
    let err = c.fetch_matrix(&info).unwrap_err();
    assert_eq!(code(&err), ErrorCode::NotReady);
    c.load_library("testlib").unwrap();
    let err = c.run("testlib", "truncated_svd", &[TaskValue::Handle(info.id), TaskValue::Int(2)]).unwrap_err();
    assert_eq!(code(&err), ErrorCode::NotReady);
}

#[test]
fn handles_do_not_cross_sessions() {
    let g = gateway(4);
    let mut a = client(&g);
    let mut b = client(&g);
    a.request_workers(2).unwrap();
    b.request_workers(2).unwrap();
    let m = random(6, 6, 2);
    let ha = a.send_matrix(&m, DistPair::VC_STAR).unwrap();
    let err = b.fetch_matrix(&ha).unwrap_err();
    assert_eq!(code(&err), ErrorCode::StaleHandle);
    b.load_library("testlib").unwrap();
    let err = b.run("testlib", "multiply", &[TaskValue::Handle(ha.id), TaskValue::Handle(ha.id)]).unwrap_err();
    assert_eq!(code(&err), ErrorCode::StaleHandle);
}

#[test]
fn closed_session_is_stale() {
    let g = gateway(2);
    let mut a = client(&g);
    a.request_workers(2).unwrap();
    let stale_id = a.session_id();
    let worker = a.workers()[0].clone();
    a.close().unwrap();
    assert_eq!(g.stored_matrices(0) + g.stored_matrices(1), 0);

    let mut s = TcpStream::connect(worker.address()).unwrap();
    let req = alchemist_core::protocol::FetchRequest {
        handle_id: 1,
        rows: StridedRange::contiguous(0, 1),
        cols: StridedRange::contiguous(0, 1),
    };
    let frame = Frame::new(Command::FetchBlock, stale_id, req.to_payload());
    alchemist_core::protocol::write_frame(&mut s, &frame, DEFAULT_BUFFER_BYTES).unwrap();
    let reply = alchemist_core::protocol::read_frame(&mut s, DEFAULT_BUFFER_BYTES).unwrap().unwrap();
    assert_eq!(reply.command, Command::Error);
    let err = alchemist_core::protocol::ErrorReply::from_payload(&reply.payload).unwrap().into_error();
    assert_eq!(code(&err), ErrorCode::StaleSession);
}

#[test]
fn handshake_negotiation() {
    let mut config = GatewayConfig::new(1, 0);
    config.max_buffer_bytes = 1 << 20;
    let g = Gateway::start_any(config).unwrap();
    let a = Client::connect(g.host(), g.port()).unwrap();
    assert_eq!(a.buffer_bytes(), 1 << 20);
    let b = Client::connect_with_buffer(g.host(), g.port(), 64 << 10).unwrap();
    assert_eq!(b.buffer_bytes(), 64 << 10);
    assert_ne!(a.session_id(), b.session_id());
    let err = Client::connect_with_buffer(g.host(), g.port(), 1000).err().unwrap();
    assert_eq!(code(&err), ErrorCode::InvalidBuffer);
}

#[test]
fn default_buffer_is_confirmed() {
    let g = gateway(1);
    let c = client(&g);
    assert_eq!(c.buffer_bytes(), 100 << 20);
}

#[test]
fn raw_handshake_bytes() {
    let g = gateway(1);
    let mut s = TcpStream::connect(g.driver_addr()).unwrap();
    let mut bytes = vec![1u8, 1, 0, 0];
    bytes.extend_from_slice(&0u64.to_le_bytes());
    bytes.extend_from_slice(&8u32.to_le_bytes());
    bytes.extend_from_slice(&(1u64 << 20).to_le_bytes());
    s.write_all(&bytes).unwrap();
    let mut header = [0u8; HEADER_LEN];
    s.read_exact(&mut header).unwrap();
    assert_eq!(header[0], 1);
    assert_eq!(header[1], 11);
    assert_eq!(&header[2..4], &[0, 0]);
    let sid = u64::from_le_bytes(header[4..12].try_into().unwrap());
    let len = u32::from_le_bytes(header[12..16].try_into().unwrap());
    assert_eq!(len, 16);
    let mut payload = vec![0u8; len as usize];
    s.read_exact(&mut payload).unwrap();
    let reply = HandshakeReply::from_payload(&payload).unwrap();
    assert_eq!(reply.session_id, sid);
    assert_eq!(reply.buffer_bytes, 1 << 20);
    assert_eq!(Handshake { buffer_bytes: 1 << 20 }.to_payload(), bytes[16..].to_vec());
}

#[test]
fn bad_version_is_reported() {
    let g = gateway(1);
    let mut s = TcpStream::connect(g.driver_addr()).unwrap();
    let mut bytes = vec![2u8, 1, 0, 0];
    bytes.extend_from_slice(&0u64.to_le_bytes());
    bytes.extend_from_slice(&0u32.to_le_bytes());
    s.write_all(&bytes).unwrap();
    let reply = alchemist_core::protocol::read_frame(&mut s, DEFAULT_BUFFER_BYTES).unwrap().unwrap();
    assert_eq!(reply.command, Command::Error);
    let err = alchemist_core::protocol::ErrorReply::from_payload(&reply.payload).unwrap().into_error();
    assert_eq!(code(&err), ErrorCode::VersionMismatch);
}

#[test]
fn library_loading() {
    let g = gateway(1);
    let mut c = client(&g);
    let id = c.load_library("testlib").unwrap();
    assert_eq!(c.load_library("testlib").unwrap(), id);
    assert_eq!(code(&c.load_library("foo").unwrap_err()), ErrorCode::LibraryNotFound);
    c.request_workers(1).unwrap();
    let err = c.run("testlib", "nope", &[]).unwrap_err();
    assert_eq!(code(&err), ErrorCode::UnknownFunction);
}

#[test]
fn multiply_shape_law() {
    let g = gateway(3);
    let mut c = client(&g);
    c.request_workers(3).unwrap();
    c.load_library("testlib").unwrap();
    let a = random(11, 4, 1);
    let b = random(4, 6, 2);
    let ha = c.send_matrix(&a, DistPair::MC_MR).unwrap();
    let hb = c.send_matrix(&b, DistPair::STAR_VR).unwrap();
    let out = c.run("testlib", "multiply", &[TaskValue::Matrix(ha), TaskValue::Matrix(hb)]).unwrap();
    let hc = *out[0].as_matrix().unwrap();
    assert_eq!((hc.rows(), hc.cols()), (11, 6));
    let got = c.fetch_matrix(&hc).unwrap();
    assert!((&got - &a.dot(&b)).iter().all(|d| d.abs() < 1e-12));
    let err = c.run("testlib", "multiply", &[TaskValue::Matrix(ha), TaskValue::Matrix(ha)]).unwrap_err();
    assert_eq!(code(&err), ErrorCode::InvalidArgument);
}

#[test]
fn simulator_round_trip() {
    let g = gateway(1);
    let mut c = client(&g);
    c.request_workers(1).unwrap();
    c.load_library("testlib").unwrap();
    let state = c.run("testlib", "reset", &[]).unwrap();
    assert_eq!(state, vec![TaskValue::Float(0.0), TaskValue::Float(1.0), TaskValue::Int(0)]);
    let mut steps = 0;
    loop {
        let score = c.run("testlib", "get_score", &[]).unwrap()[0].as_float().unwrap();
        if score == 0.0 {
            break;
        }
        let s = c.run("testlib", "get_state", &[]).unwrap();
        let action = (s[1].as_float().unwrap() - s[0].as_float().unwrap()).clamp(-0.1, 0.1);
        c.run("testlib", "step", &[TaskValue::Float(action)]).unwrap();
        steps += 1;
        assert!(steps <= 10);
    }
    assert_eq!(steps, 10);
    let err = c.run("testlib", "step", &[TaskValue::Float(f64::NAN)]).unwrap_err();
    assert_eq!(code(&err), ErrorCode::InvalidAction);
}

#[test]
fn occupied_port_reports_bind_error() {
    let g = gateway(2);
    let err = Gateway::start(GatewayConfig::new(2, g.port())).err().unwrap();
    match err {
        Error::Bind { port, .. } => assert_eq!(port, g.port()),
        other => panic!("expected a bind error, got {other}"),
    }
}

#[test]
fn address_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("addr");
    let mut config = GatewayConfig::new(2, 0);
    config.address_file = Some(path.clone());
    let g = Gateway::start_any(config).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, format!("{}:{}\n", g.host(), g.port()));
    let mut c = Client::from_address_file(&path, DEFAULT_BUFFER_BYTES).unwrap();
    assert_eq!(c.request_workers(2).unwrap().len(), 2);
}

#[test]
fn refused_connection_is_an_io_error() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let err = Client::connect("127.0.0.1", port).err().unwrap();
    assert_eq!(code(&err), ErrorCode::Io);
}

#[test]
fn command_log_is_deterministic() {
    fn run_once() -> (Vec<(Endpoint, Command)>, String) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log");
        let mut config = GatewayConfig::new(2, 0);
        config.log_path = Some(path.clone());
        config.record_commands = true;
        let g = Gateway::start_any(config).unwrap();
        let mut c = client(&g);
        c.request_workers(2).unwrap();
        c.load_library("testlib").unwrap();
        let h = c.send_matrix(&random(6, 3, 1), DistPair::VC_STAR).unwrap();
        c.fetch_matrix(&h).unwrap();
        c.close().unwrap();
        let entries = g.command_log().into_iter().map(|e| (e.endpoint, e.command)).collect();
        drop(g);
        let text = std::fs::read_to_string(&path).unwrap();
        let driver_lines: String = text
            .lines()
            .filter(|l| l.starts_with("driver session"))
            .map(|l| l.split_whitespace().last().unwrap().to_owned() + "\n")
            .collect();
        (entries, driver_lines)
    }
    let (a, la) = run_once();
    let (b, lb) = run_once();
    let mut sa = a.clone();
    let mut sb = b.clone();
    sa.sort();
    sb.sort();
    assert_eq!(sa, sb);
    assert_eq!(la, lb);
    assert_eq!(la, "cmd=HANDSHAKE\ncmd=REQUEST_WORKERS\ncmd=LOAD_LIBRARY\ncmd=CREATE_MATRIX\ncmd=CLOSE_SESSION\n");
}
