use fpms_core::config::{Scheme, SimConfig};
use fpms_core::sim::Simulation;

fn main() {
    let mut cfg = SimConfig::default();
    cfg.n = 30;
    cfg.area_x = 500.0;
    cfg.area_y = 500.0;
    cfg.radio_range = 160.0;
    cfg.scheme = Scheme::Centralized;
    cfg.malicious_ratio = 0.2;
    cfg.malicious_drop_prob = 1.0;
    cfg.nam_threshold = 40.0;
    cfg.run_length = 12;
    cfg.seed = 40;
    let mut sim = Simulation::new(cfg).unwrap();
    let truth = sim.truth_malicious().clone();
    println!("malicious: {truth:?}");
    for k in 1..=12u64 {
        sim.run_interval();
        let st = &sim.servers()[0].state;
        let mut hon: Vec<(u32, f64)> = vec![];
        let mut mal: Vec<(u32, f64)> = vec![];
        for v in sim.topology().nodes() {
            let s = st.nam_row_sum(v);
            if truth.contains(&v) { mal.push((v.0, s)); } else if s > 0.0 { hon.push((v.0, s)); }
        }
        hon.sort_by(|a, b| b.1.total_cmp(&a.1));
        println!("k={k} blacklist={:?}", st.blacklist());
        println!("  mal rows: {mal:?}");
        println!("  hon top5: {:?}", &hon[..hon.len().min(5)]);
    }
}
