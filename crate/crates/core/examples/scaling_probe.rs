use groundstate::field::Grid;
use groundstate::functionals::{gaussian_bump, j, v, ProblemSpec};
use groundstate::nonlinearity::Nonlinearity;
use groundstate::transforms::dilate;

fn main() {
    for &(dim, p, l, n, w, a) in &[
        (3usize, 2.0f64, 8.0f64, 128usize, 1.8f64, 6.0f64),
        (3, 2.0, 8.0, 160, 1.8, 6.0),
        (3, 2.0, 8.0, 192, 1.8, 6.0),
        (3, 2.0, 8.0, 160, 1.5, 6.0),
        (3, 2.0, 10.0, 160, 2.0, 6.0),
        (3, 2.0, 10.0, 192, 2.0, 6.0),
        (2, 1.5, 8.0, 192, 1.5, 6.0),
        (2, 1.5, 8.0, 256, 1.5, 6.0),
        (2, 1.5, 8.0, 384, 1.2, 5.0),
    ] {
        let spec = ProblemSpec::new(dim, p, Nonlinearity::cubic()).unwrap();
        let grid = Grid::new(dim, l, n).unwrap();
        let f = gaussian_bump(grid, 1, a, w, &vec![0.0; dim]);
        let (j0, v0) = (j(&f, &spec), v(&f, &spec));
        print!("N={dim} p={p} L={l} n={n} w={w} A={a}: ");
        for sigma in [0.5f64, 2.0] {
            let fs = dilate(&f, sigma);
            let js = j(&fs, &spec);
            let vs = v(&fs, &spec);
            let jx = sigma.powf(dim as f64 - p) * j0;
            let vx = sigma.powf(dim as f64) * v0;
            print!(
                "σ={sigma}: Jerr {:+.2}% Verr {:+.2}%  ",
                100.0 * (js / jx - 1.0),
                100.0 * (vs / vx - 1.0)
            );
        }
        println!();
    }
}
