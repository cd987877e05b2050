mod common;
use common::{load_fixture, reference_library};
use netcloak::expansion::{embed_graph_greedy, select_reference};
use netcloak::topology::extract_topology;

#[test]
fn repro_embed_hang() {
    let snap = load_fixture("campus");
    let lib = reference_library();
    let topo = extract_topology(&snap).unwrap();
    let g = topo.router_graph();
    let reference = select_reference(&g, &lib, 10).unwrap();
    eprintln!("ref = {} n={}", reference.name, reference.router_count());
    let (emb, _) = embed_graph_greedy(&g, &reference).unwrap();
    eprintln!("embedded n={} connected={}", emb.router_count(), emb.is_connected_over_routers());
}
