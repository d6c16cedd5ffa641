//! Starts an in-process gateway, sends a matrix, runs a truncated SVD on it
//! and fetches the singular values.

use alchemist_core::{Client, DistPair, Gateway, GatewayConfig, TaskValue};
use ndarray::Array2;

fn main() -> alchemist_core::Result<()> {
    let gateway = Gateway::start_any(GatewayConfig::new(4, 0))?;
    let mut client = Client::connect(gateway.host(), gateway.port())?;
    client.request_workers(4)?;
    client.load_library("testlib")?;

    let a = Array2::from_shape_fn((300, 40), |(i, j)| ((i * 7 + j * 3) % 11) as f64 + if i == j { 1.0 } else { 0.0 });
    let info = client.send_matrix(&a, DistPair::MC_MR)?;
    let out = client.run("testlib", "truncated_svd", &[TaskValue::Handle(info.id), TaskValue::Int(5)])?;
    let s = out[1].as_matrix().expect("S is a matrix");
    let values = client.fetch_matrix(s)?;
    println!("top singular values: {:?}", values.column(0).to_vec());

    client.close()
}
