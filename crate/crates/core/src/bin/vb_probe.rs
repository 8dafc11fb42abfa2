// quick probe: time the low-rank quadrature oracle
fn main() {
    use bdmc::model::{self, LowRankSpec, ModelSpec};
    use bdmc::RngStream;
    for seed in [5u64, 22] {
        let spec = ModelSpec::LowRank(LowRankSpec::new(2, 1, 1, 0.9, 1.1, 0.5).unwrap());
        let (_, data) = model::simulate(&spec, &RngStream::new(seed, 0));
        eprintln!("-- seed {seed}: y = {:?}", data.y.as_slice());
        let t0 = std::time::Instant::now();
        let v = model::brute_force_log_ml(&spec, &data).unwrap();
        eprintln!("-- seed {seed}: oracle {v} in {:?}", t0.elapsed());
    }
}
