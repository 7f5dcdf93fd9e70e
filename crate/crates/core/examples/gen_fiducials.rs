//! Dev utility: search Weyl-Heisenberg SIC fiducials and print a Rust table.
//! Run with `cargo run --release -p sparsecd --example gen_fiducials [dims...]`.

use sparsecd::matrices::find_fiducial;
use sparsecd::seeding::single_rng;

fn main() {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("dimension"))
        .collect();
    let dims = if args.is_empty() {
        vec![2, 3, 4, 5, 6, 7, 8, 9]
    } else {
        args
    };
    for d in dims {
        let mut found = None;
        for seed in 0..64u64 {
            let mut rng = single_rng(1000 + seed);
            match find_fiducial(d, &mut rng, 1e-11, 6) {
                Ok(f) => {
                    found = Some(f);
                    break;
                }
                Err(e) => eprintln!("d={d} seed {seed}: {e}"),
            }
        }
        match found {
            Some(f) => {
                eprintln!("d={d}: residual {:.3e}", f.residual);
                println!("        {d} => Some(&[");
                for z in f.vector.iter() {
                    println!("            ({:?}, {:?}),", z.re, z.im);
                }
                println!("        ]),");
            }
            None => eprintln!("d={d}: FAILED"),
        }
    }
}
