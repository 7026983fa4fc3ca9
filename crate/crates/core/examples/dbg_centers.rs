// scratch: examine accepted center positions
fn main() {
    let s = nodalab::Surface::flat_torus(1.0, 1.0, 64, 64).unwrap();
    let pair = nodalab::spectral::closed_form_eigenpair(
        &s,
        nodalab::spectral::ClosedFormFamily::Torus {
            m: 1, n: 0,
            branch: nodalab::spectral::TorusBranch::Sine,
            period_u: 1.0, period_v: 1.0,
        },
    ).unwrap();
    let set = nodalab::nodal::extract_nodal_set(&pair, s.mesh()).unwrap();
    let cluster = nodalab::pixelize::select_centers(&set, &s, 0.1).unwrap();
    let mut line0: Vec<f64> = cluster.centers.iter().filter(|c| c.position[0].rem_euclid(1.0) < 0.25 || c.position[0].rem_euclid(1.0) > 0.75).map(|c| c.position[1]).collect();
    let mut line1: Vec<f64> = cluster.centers.iter().filter(|c| (c.position[0].rem_euclid(1.0) - 0.5).abs() < 0.25).map(|c| c.position[1]).collect();
    line0.sort_by(|a,b| a.partial_cmp(b).unwrap());
    line1.sort_by(|a,b| a.partial_cmp(b).unwrap());
    println!("line0 ({}): {:?}", line0.len(), line0.iter().map(|y| (y*1000.0).round()/1000.0).collect::<Vec<_>>());
    println!("line1 ({}): {:?}", line1.len(), line1.iter().map(|y| (y*1000.0).round()/1000.0).collect::<Vec<_>>());
}
