use super::aig::{AigBuilder, AigCircuit};

/// Full adder over optional operands; a missing operand is constant false.
fn add_bit(b: &mut AigBuilder, x: u32, y: Option<u32>, carry: Option<u32>) -> (u32, Option<u32>) {
    match (y, carry) {
        (None, None) => (x, None),
        (Some(y), None) | (None, Some(y)) => (b.xor(x, y), Some(b.and(x, y))),
        (Some(y), Some(c)) => {
            let t = b.xor(x, y);
            let sum = b.xor(t, c);
            let g = b.and(x, y);
            let p = b.and(t, c);
            (sum, Some(b.or(g, p)))
        }
    }
}

fn name_operands(b: &mut AigBuilder, bits: usize) {
    for k in 0..bits {
        b.name_input(k, &format!("a{k}"));
        b.name_input(bits + k, &format!("b{k}"));
    }
}

/// `bits`-bit ripple-carry adder: inputs `a0..`, `b0..` (least significant
/// first), outputs the sum bits followed by the carry out.
pub fn ripple_carry_adder(bits: usize) -> AigCircuit {
    assert!(bits > 0, "adder needs at least one bit");
    let mut b = AigBuilder::new(2 * bits);
    name_operands(&mut b, bits);
    let mut carry = None;
    for k in 0..bits {
        let (x, y) = (b.input(k), b.input(bits + k));
        let (sum, c) = add_bit(&mut b, x, Some(y), carry);
        carry = c;
        let o = b.output(sum);
        b.name_output(o, &format!("s{k}"));
    }
    let o = b.output(carry.expect("at least one full or half adder"));
    b.name_output(o, "cout");
    b.finish()
}

/// `bits`×`bits` array multiplier: inputs `a0..`, `b0..`, outputs the
/// `2·bits` product bits, least significant first.
pub fn array_multiplier(bits: usize) -> AigCircuit {
    assert!(bits > 0, "multiplier needs at least one bit");
    let mut b = AigBuilder::new(2 * bits);
    name_operands(&mut b, bits);
    let a: Vec<u32> = (0..bits).map(|k| b.input(k)).collect();
    let y: Vec<u32> = (0..bits).map(|k| b.input(bits + k)).collect();
    let mut product = Vec::with_capacity(2 * bits);
    let row0: Vec<u32> = a.iter().map(|&x| b.and(x, y[0])).collect();
    product.push(row0[0]);
    let mut high: Vec<u32> = row0[1..].to_vec();
    for &yj in &y[1..] {
        let row: Vec<u32> = a.iter().map(|&x| b.and(x, yj)).collect();
        let mut sum = Vec::with_capacity(bits + 1);
        let mut carry = None;
        for (k, &x) in row.iter().enumerate() {
            let (s, c) = add_bit(&mut b, x, high.get(k).copied(), carry);
            sum.push(s);
            carry = c;
        }
        sum.push(carry.unwrap_or(0));
        product.push(sum[0]);
        high = sum[1..].to_vec();
    }
    product.extend(high);
    product.resize(2 * bits, 0);
    for (k, &p) in product.iter().enumerate() {
        let o = b.output(p);
        b.name_output(o, &format!("p{k}"));
    }
    b.finish()
}
