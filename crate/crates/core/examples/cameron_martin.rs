//! The Cameron–Martin map of a network drift and its norm.
//!
//! Maps a scalar tanh network through `J` on successively finer grids and
//! compares against the closed-form antiderivative, then checks the isometry
//! `‖J(f)‖²_H = ⟨f, f⟩` for a correlated two-dimensional driver.

use isdrift::ffn::{antiderivative_net, Activation, ShallowNet};
use isdrift::gaussian::{cameron_martin_map, lambda2_inner, CovariationSpec, GridFunction, TimeGrid};
use isdrift::linalg::Matrix;

fn main() -> isdrift::Result<()> {
    let net = ShallowNet::from_params(3, 1, Activation::Tanh, vec![1.2, -0.7, 0.4, 0.1, 0.5, -0.3, 0.8, -0.6, 0.3, 0.2])?;
    let exact = antiderivative_net(&net)?;

    println!("{:>6} {:>12}", "steps", "max |h - H|");
    for n in [63, 126, 252, 504, 1008] {
        let grid = TimeGrid::uniform(1.0, n)?;
        let cov = CovariationSpec::new(Matrix::identity(1), grid.clone())?;
        let f = GridFunction::sample(&grid, 1, |t, out| net.forward_into(t, out));
        let h = cameron_martin_map(&f, &cov)?;
        let err = grid
            .times()
            .iter()
            .enumerate()
            .map(|(k, &t)| (h.h(k)[0] - exact.eval(t)).abs())
            .fold(0.0, f64::max);
        println!("{n:>6} {err:>12.3e}");
    }

    let sigma = Matrix::from_rows(&[vec![0.3, 0.0], vec![0.12, 0.25]])?;
    let grid = TimeGrid::uniform(1.0, 252)?;
    let cov = CovariationSpec::new(sigma, grid.clone())?;
    let f = GridFunction::sample(&grid, 2, |t, out| {
        out[0] = 1.0 + t;
        out[1] = (3.0 * t).sin();
    });
    let h = cameron_martin_map(&f, &cov)?;
    println!("\n‖J(f)‖²_H = {:.15}", h.norm_sq());
    println!("⟨f, f⟩    = {:.15}", lambda2_inner(&f, &f, &cov)?);
    println!("h(u)      = {:?}", h.h(grid.n_steps()));
    Ok(())
}
