//! Building, evaluating and printing a single regression tree by hand.

use robart::tree::{split_values, SplitRule, Tree};
use robart::Matrix;

fn main() -> robart::Result<()> {
    let x = Matrix::from_rows(&[
        vec![0.1, 5.0],
        vec![0.4, 3.0],
        vec![0.6, 4.0],
        vec![0.9, 1.0],
    ])?;
    let mut tree = Tree::leaf(2, 0.0);
    let (left, right) = tree.split_leaf(0, SplitRule { var: 0, value: 0.5 }, -1.0, 1.0);
    let (rl, rr) = tree.split_leaf(right, SplitRule { var: 1, value: 2.0 }, 0.5, 2.0);
    println!("{}", tree.dump());
    println!("leaves {}, depth {}", tree.num_leaves(), tree.max_depth());
    for (i, row) in x.rows().enumerate() {
        println!("row {i} -> leaf {} value {}", tree.leaf_index(row), tree.predict(row));
    }
    println!("rows at left leaf {left}: {:?}", tree.rows_at(left, &x));
    println!("leaves {rl} and {rr} share the right subtree");
    println!("cuts on x2 within the right subtree: {:?}", split_values(&x, &tree.rows_at(right, &x), 1, 1));
    tree.validate().expect("well-formed tree");
    Ok(())
}
