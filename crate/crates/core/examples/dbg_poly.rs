use cgd_core::codes::{CompressionCode, PiecewisePolyCode};
use cgd_core::rng::SeededRng;
use cgd_core::polyfit::viterbi_segmentation;
use cgd_core::Signal;

fn main() {
    let code = PiecewisePolyCode::new(14, 1, 2, 9, 1.0).unwrap();
    let mut rng = SeededRng::new(9);
    for trial in 0..60 {
        let x = Signal::from_vec((0..14).map(|_| rng.uniform(0.0, 0.9)).collect()).unwrap();
        let stream = code.encode(&x).unwrap();
        let decoded = code.decode(&stream).unwrap();
        let restream = code.encode(&decoded).unwrap();
        if stream != restream {
            let seg = viterbi_segmentation(&x, 1, 2);
            println!("trial {trial}: splits {:?}", seg.singularities);
            for f in &seg.segment_fits {
                println!("  fit {:?} err {}", f.coefficients, f.error);
            }
            let seg2 = viterbi_segmentation(&decoded, 1, 2);
            println!("  refit splits {:?}", seg2.singularities);
            for f in &seg2.segment_fits {
                println!("  refit {:?} err {}", f.coefficients, f.error);
            }
            break;
        }
    }
}
