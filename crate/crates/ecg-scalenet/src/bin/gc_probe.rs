use ecg_scalenet::resnet::{build_network, gradient_check_model, ScaleConfig};
use ecg_scalenet::rng::named_stream;
use ecg_scalenet::Tensor;
use std::time::Instant;

fn main() {
    for seed in 1u64..=10 {
        let scale = ScaleConfig::new(2, 4, 3).unwrap();
        let mut model = build_network(scale, 3, seed).unwrap();
        let mut rng = named_stream(5, "toy-input");
        let x = Tensor::randn(&[2, 12, 64], 1.0, &mut rng);
        let t0 = Instant::now();
        let report = gradient_check_model(&mut model, &x, 1e-5).unwrap();
        let mut entries = report.entries.clone();
        entries.sort_by(|a, b| b.max_rel_error.total_cmp(&a.max_rel_error));
        println!("seed {seed}: worst {:.3e} ({}) [{:.1}s]", entries[0].max_rel_error, entries[0].name, t0.elapsed().as_secs_f64());
    }
}
