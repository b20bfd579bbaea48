use nalgebra::DMatrix;

#[test]
fn probe() {
    let n = 10usize;
    let a = DMatrix::from_fn(n, n, |i, j| if (i < 5) == (j < 5) { 0.2 } else { 0.0 });
    let gram = &a * a.transpose();
    let eig = gram.symmetric_eigen();
    // indices sorted by eigenvalue descending
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].partial_cmp(&eig.eigenvalues[x]).unwrap());
    println!("top eigenvalues: {:?}", order.iter().take(3).map(|&k| eig.eigenvalues[k]).collect::<Vec<_>>());
    for i in 0..n {
        println!("row {i}: ({:.4}, {:.4})", eig.eigenvectors[(i, order[0])], eig.eigenvectors[(i, order[1])]);
    }
}
