use nodalab::spectral::*;
use nodalab::nodal::*;
use nodalab::estimates::*;
fn main() {
    let s = nodalab::Surface::flat_torus(1.0, 1.0, 128, 128).unwrap();
    let pair = closed_form_eigenpair(&s, ClosedFormFamily::Torus {
        m: 2, n: 0, branch: TorusBranch::Sine, period_u: 1.0, period_v: 1.0,
    }).unwrap();
    let mesh = s.mesh();
    let ops = assemble_laplacian(mesh);
    let set = extract_nodal_set(&pair, mesh).unwrap();
    let domains = nodal_domains(&pair, mesh, 0.0).unwrap();
    println!("domains: {} volumes: {:?}", domains.count, &domains.volumes[..domains.count.min(6)]);
    let r = nodal_domain_eigencheck(&pair, mesh, &ops, &domains, 0, &set).unwrap();
    println!("lambda1 = {}  (target {})", r.lambda1_dirichlet, pair.lambda);
    println!("gap = {}", r.relative_gap);
    println!("interior = {}", r.interior_vertices);
    println!("volume = {}", r.volume);
}
