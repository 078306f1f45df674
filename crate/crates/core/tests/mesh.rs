use std::collections::HashMap;

use morphsynth::design::{MaterialField, Mask, assign_material_states};
use morphsynth::geometry::{point_in_polygon, signed_area, Containment, Vec2};
use morphsynth::hexmesh::{boundary_loops, HexMesh};
use proptest::prelude::*;

/// All element vertices, merged by a distance scan.
fn brute_force_vertices(mesh: &HexMesh) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::new();
    for e in 0..mesh.elements.len() {
        for p in mesh.polygon(e) {
            if !out.iter().any(|q| (q - p).norm() < 1e-9 * mesh.edge_length) {
                out.push(p);
            }
        }
    }
    out
}

#[test]
fn two_by_two_shares_vertices() {
    let mesh = HexMesh::generate_grid(2, 2, 1.0).unwrap();
    assert_eq!(mesh.elements.len(), 4);
    assert_eq!(brute_force_vertices(&mesh).len(), mesh.nodes.len());
    assert_eq!(mesh.nodes.len(), 16);
    // no two nodes at the same place
    for (i, a) in mesh.nodes.iter().enumerate() {
        for b in &mesh.nodes[i + 1..] {
            assert!((a.position - b.position).norm() > 1e-9);
        }
    }
}

#[test]
fn cells_are_regular_and_counter_clockwise() {
    let mesh = HexMesh::generate_grid(5, 4, 1.7).unwrap();
    for e in 0..mesh.elements.len() {
        let poly = mesh.polygon(e);
        assert!((signed_area(&poly) - mesh.element_area()).abs() < 1e-12);
        for k in 0..6 {
            assert!(((poly[(k + 1) % 6] - poly[k]).norm() - 1.7).abs() < 1e-12);
        }
    }
}

#[test]
fn boundary_edges_match_owner_tally() {
    let mesh = HexMesh::generate_grid(6, 5, 1.0).unwrap();
    let masks = [
        Mask { x: 4.0, y: 4.0, r: 2.5, s: false, f: 0.5 },
        Mask { x: 9.0, y: 6.0, r: 1.5, s: false, f: 0.5 },
    ];
    let material = assign_material_states(&mesh, &masks);
    let mut tally: HashMap<(usize, usize), usize> = HashMap::new();
    for e in material.solid_elements() {
        let ids = mesh.elements[e].node_ids;
        for k in 0..6 {
            let (p, q) = (ids[k], ids[(k + 1) % 6]);
            *tally.entry((p.min(q), p.max(q))).or_default() += 1;
        }
    }
    let mut expected: Vec<(usize, usize)> = tally.iter().filter(|(_, &c)| c == 1).map(|(&k, _)| k).collect();
    expected.sort_unstable();
    let edges = mesh.boundary_edges(&material);
    let mut got: Vec<(usize, usize)> = edges.iter().map(|e| (e.node_pair.0.min(e.node_pair.1), e.node_pair.0.max(e.node_pair.1))).collect();
    got.sort_unstable();
    assert_eq!(got, expected);
    for e in &edges {
        // the owner's centroid lies opposite to the outward normal
        let p = mesh.nodes[e.node_pair.0].position;
        assert!((mesh.centroid(e.owner_element) - p).dot(&e.outward_normal) < 0.0);
        assert!((e.outward_normal.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn loops_of_a_solid_block_enclose_its_area() {
    let mesh = HexMesh::generate_grid(4, 3, 1.0).unwrap();
    let edges = mesh.boundary_edges(&MaterialField::all_solid(mesh.elements.len()));
    let loops = boundary_loops(&edges).unwrap();
    assert_eq!(loops.len(), 1);
    let poly: Vec<Vec2> = loops[0].iter().map(|&n| mesh.nodes[n].position).collect();
    let total = mesh.element_area() * mesh.elements.len() as f64;
    assert!((signed_area(&poly) - total).abs() < 1e-9);
}

#[test]
fn a_hole_gives_a_clockwise_loop() {
    let mesh = HexMesh::generate_grid(5, 5, 1.0).unwrap();
    let mut material = MaterialField::all_solid(mesh.elements.len());
    material.rho[2 * 5 + 2] = false;
    let loops = boundary_loops(&mesh.boundary_edges(&material)).unwrap();
    assert_eq!(loops.len(), 2);
    let areas: Vec<f64> = loops
        .iter()
        .map(|l| signed_area(&l.iter().map(|&n| mesh.nodes[n].position).collect::<Vec<_>>()))
        .collect();
    assert!(areas.iter().any(|&a| (a + mesh.element_area()).abs() < 1e-9));
}

#[test]
fn neighbors_are_symmetric() {
    let mesh = HexMesh::generate_grid(5, 3, 1.0).unwrap();
    for e in 0..mesh.elements.len() {
        for nb in mesh.neighbors(e).iter().flatten() {
            assert!(mesh.neighbors(*nb).contains(&Some(e)));
        }
    }
}

#[test]
fn area_sum_matches_domain() {
    let mesh = HexMesh::generate_grid(7, 4, 2.0).unwrap();
    let sum: f64 = (0..mesh.elements.len()).map(|e| signed_area(&mesh.polygon(e))).sum();
    assert!((sum - 28.0 * 1.5 * 3f64.sqrt() * 4.0).abs() < 1e-9);
    let (l1, l2) = mesh.domain_extents();
    assert!((l1 - 21.0).abs() < 1e-12 && (l2 - 4.0 * 3f64.sqrt() * 2.0).abs() < 1e-12);
}

#[test]
fn invalid_arguments_are_named() {
    let err = HexMesh::generate_grid(0, 3, 1.0).unwrap_err();
    assert!(err.to_string().contains("cols"));
    let err = HexMesh::generate_grid(3, 3, -1.0).unwrap_err();
    assert!(err.to_string().contains("edge_length"));
}

fn scan_locate(mesh: &HexMesh, p: &Vec2) -> Option<usize> {
    (0..mesh.elements.len()).find(|&e| point_in_polygon(p, &mesh.polygon(e), 1e-9) != Containment::Outside)
}

proptest! {
    #[test]
    fn locate_agrees_with_a_full_scan(x in -1.0f64..25.0, y in -1.0f64..20.0) {
        let mesh = HexMesh::generate_grid(8, 5, 2.0).unwrap();
        let p = Vec2::new(x, y);
        prop_assert_eq!(mesh.locate_point(&p), scan_locate(&mesh, &p));
    }

    #[test]
    fn node_count_follows_the_lattice(cols in 1usize..9, rows in 1usize..9) {
        let mesh = HexMesh::generate_grid(cols, rows, 1.0).unwrap();
        prop_assert_eq!(mesh.elements.len(), cols * rows);
        prop_assert_eq!(brute_force_vertices(&mesh).len(), mesh.nodes.len());
        // each node belongs to one, two or three cells
        for n in 0..mesh.nodes.len() {
            let k = mesh.node_elements(n).len();
            prop_assert!((1..=3).contains(&k));
        }
    }

    #[test]
    fn nearest_node_is_a_true_minimum(x in -2.0f64..12.0, y in -2.0f64..12.0) {
        let mesh = HexMesh::generate_grid(4, 4, 1.5).unwrap();
        let p = Vec2::new(x, y);
        let best = mesh.nearest_node(&p);
        let d = (mesh.nodes[best].position - p).norm();
        prop_assert!(mesh.nodes.iter().all(|n| (n.position - p).norm() >= d));
    }
}
