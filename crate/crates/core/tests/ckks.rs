use std::sync::Arc;

use hpfed::ckks::modarith::{closest_ntt_prime, Modulus};
use hpfed::ckks::ntt::{negacyclic_schoolbook, NttTable};
use hpfed::ckks::{
    ciphertext_size, Ciphertext, CkksContext, CkksError, CkksParams, Preset, PublicKey, RelinKey,
    SecretKey,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Keys {
    ctx: Arc<CkksContext>,
    sk: SecretKey,
    pk: PublicKey,
    rlk: RelinKey,
}

fn setup(seed: u64) -> Keys {
    let ctx = CkksContext::new(CkksParams::preset(Preset::Test)).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sk = SecretKey::generate(&ctx, &mut rng);
    let pk = PublicKey::generate(&ctx, &sk, &mut rng);
    let rlk = RelinKey::generate(&ctx, &sk, &mut rng);
    Keys { ctx, sk, pk, rlk }
}

fn random_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn ntt_product_equals_schoolbook_exactly() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for log_n in 1..=6 {
        let n = 1usize << log_n;
        for bits in [20.0, 45.0, 61.0] {
            let q = Modulus::new(closest_ntt_prime(2f64.powf(bits), n, &[]).unwrap());
            let table = NttTable::new(q, n);
            for _ in 0..20 {
                let a: Vec<u64> = (0..n).map(|_| rng.random_range(0..q.value())).collect();
                let b: Vec<u64> = (0..n).map(|_| rng.random_range(0..q.value())).collect();
                let expect = negacyclic_schoolbook(&a, &b, &q);
                let (mut fa, mut fb) = (a.clone(), b.clone());
                table.forward(&mut fa);
                table.forward(&mut fb);
                let mut c: Vec<u64> = fa.iter().zip(&fb).map(|(x, y)| q.mul(*x, *y)).collect();
                table.inverse(&mut c);
                assert_eq!(c, expect, "n={n} q={}", q.value());
            }
        }
    }
}

#[test]
fn encode_decode_roundtrip() {
    let k = setup(1);
    let top = k.ctx.max_level();
    let v = [0.5, -0.25, 0.0, 0.75];
    let pt = k.ctx.encode_at(&v, top).unwrap();
    let back = k.ctx.decode(&pt);
    assert!(max_err(&v, &back[..4]) < 1e-6);
    assert!(back[4..].iter().all(|x| x.abs() < 1e-6));

    let zero = k.ctx.decode(&k.ctx.encode_at(&[], top).unwrap());
    assert!(zero.iter().all(|x| x.abs() < 1e-6));

    let one = k.ctx.decode(&k.ctx.encode_at(&[1.0], top).unwrap());
    assert!((one[0] - 1.0).abs() < 1e-6);
}

#[test]
fn encoding_rejects_too_many_slots() {
    let k = setup(1);
    let v = vec![0.0; k.ctx.slots() + 1];
    assert!(matches!(
        k.ctx.encode_at(&v, 0),
        Err(CkksError::TooManySlots { .. })
    ));
}

#[test]
fn encrypt_decrypt_roundtrip_and_randomization() {
    let k = setup(2);
    let mut rng = ChaCha20Rng::seed_from_u64(20);
    let ct = k.ctx.encrypt_values(&k.pk, &[0.1, 0.9], &mut rng).unwrap();
    let out = k.ctx.decrypt_values(&k.sk, &ct);
    assert!(max_err(&[0.1, 0.9], &out[..2]) < 1e-5);

    let ct2 = k.ctx.encrypt_values(&k.pk, &[0.1, 0.9], &mut rng).unwrap();
    assert_ne!(ct.c0(), ct2.c0());

    let zero = k.ctx.encrypt_values(&k.pk, &[], &mut rng).unwrap();
    let sum = k.ctx.add(&ct, &zero).unwrap();
    assert!(max_err(&[0.1, 0.9], &k.ctx.decrypt_values(&k.sk, &sum)[..2]) < 1e-5);
}

#[test]
fn arithmetic_matches_plaintext() {
    let k = setup(3);
    let mut rng = ChaCha20Rng::seed_from_u64(30);
    let n = k.ctx.slots();
    let x = random_vec(&mut rng, n, -1.0, 1.0);
    let y = random_vec(&mut rng, n, -1.0, 1.0);
    let cx = k.ctx.encrypt_values(&k.pk, &x, &mut rng).unwrap();
    let cy = k.ctx.encrypt_values(&k.pk, &y, &mut rng).unwrap();
    let dec = |c: &Ciphertext| k.ctx.decrypt_values(&k.sk, c);

    let add: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
    assert!(max_err(&add, &dec(&k.ctx.add(&cx, &cy).unwrap())) < 1e-5);
    let sub: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    assert!(max_err(&sub, &dec(&k.ctx.sub(&cx, &cy).unwrap())) < 1e-5);

    let prod = k.ctx.mul(&cx, &cy, &k.rlk).unwrap();
    assert_eq!(prod.level(), cx.level() - 1);
    assert_eq!(prod.scale(), k.ctx.level_scale(prod.level()));
    let expect: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    assert!(max_err(&expect, &dec(&prod)) < 1e-4);

    let sq = k.ctx.square(&cx, &k.rlk).unwrap();
    let expect: Vec<f64> = x.iter().map(|a| a * a).collect();
    assert!(max_err(&expect, &dec(&sq)) < 1e-4);

    let pt = k.ctx.encode_at(&y, cx.level()).unwrap();
    assert!(max_err(&add, &dec(&k.ctx.add_plain(&cx, &pt).unwrap())) < 1e-5);
    assert!(max_err(&sub, &dec(&k.ctx.sub_plain(&cx, &pt).unwrap())) < 1e-5);

    let m = k.ctx.encode_multiplier(&y, cx.level(), cx.scale()).unwrap();
    let mp = k.ctx.mul_plain(&cx, &m).unwrap();
    let expect: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    assert!(max_err(&expect, &dec(&mp)) < 1e-5);

    let ones = k.ctx.encode_multiplier(&vec![1.0; n], cx.level(), cx.scale()).unwrap();
    assert!(max_err(&x, &dec(&k.ctx.mul_plain(&cx, &ones).unwrap())) < 1e-5);

    let c = k.ctx.add_const(&k.ctx.mul_const(&cx, -3.5).unwrap(), 0.25).unwrap();
    let expect: Vec<f64> = x.iter().map(|a| -3.5 * a + 0.25).collect();
    assert!(max_err(&expect, &dec(&c)) < 1e-5);
}

#[test]
fn level_accounting_and_exhaustion() {
    let k = setup(4);
    let mut rng = ChaCha20Rng::seed_from_u64(40);
    let mut ct = k.ctx.encrypt_values(&k.pk, &[0.9, -0.9], &mut rng).unwrap();
    let top = k.ctx.max_level();
    assert_eq!(ct.level(), top);
    for expect in (0..top).rev() {
        ct = k.ctx.square(&ct, &k.rlk).unwrap();
        assert_eq!(ct.level(), expect);
    }
    let v = k.ctx.decrypt_values(&k.sk, &ct);
    let expect = 0.9f64.powi(1 << top);
    assert!((v[0] - expect).abs() < 1e-4, "{} vs {expect}", v[0]);
    assert!(matches!(
        k.ctx.mul(&ct, &ct, &k.rlk),
        Err(CkksError::LevelExhausted(_))
    ));
    assert!(matches!(k.ctx.rescale(&ct), Err(CkksError::LevelExhausted(_))));
    assert!(matches!(k.ctx.mul_const(&ct, 2.0), Err(CkksError::LevelExhausted(_))));
}

#[test]
fn operand_mismatch_is_rejected() {
    let k = setup(5);
    let mut rng = ChaCha20Rng::seed_from_u64(50);
    let a = k.ctx.encrypt_values(&k.pk, &[0.5], &mut rng).unwrap();
    let b = k.ctx.mul_const(&a, 1.0).unwrap();
    assert!(matches!(
        k.ctx.add(&a, &b),
        Err(CkksError::LevelMismatch { .. })
    ));
    let low = k.ctx.level_down(&a, 3).unwrap();
    assert_eq!(low.level(), 3);
    assert!((k.ctx.decrypt_values(&k.sk, &low)[0] - 0.5).abs() < 1e-5);
}

#[test]
fn poly_eval_matches_plaintext() {
    let k = setup(6);
    let mut rng = ChaCha20Rng::seed_from_u64(60);
    let x = random_vec(&mut rng, 64, -1.0, 1.0);
    let ct = k.ctx.encrypt_values(&k.pk, &x, &mut rng).unwrap();
    let dec = |c: &Ciphertext| k.ctx.decrypt_values(&k.sk, c);

    let id = k.ctx.poly_eval(&ct, &[0.0, 1.0], &k.rlk).unwrap();
    assert!(max_err(&x, &dec(&id)[..64]) < 1e-5);

    let half = k.ctx.encrypt_values(&k.pk, &[0.5], &mut rng).unwrap();
    let t2 = k.ctx.poly_eval(&half, &[-1.0, 0.0, 2.0], &k.rlk).unwrap();
    assert!((dec(&t2)[0] + 0.5).abs() < 1e-4);
    assert_eq!(t2.level(), half.level() - 2);

    let coeffs = [0.0, 2.1875, 0.0, -2.1875, 0.0, 1.3125, 0.0, -0.3125];
    let out = k.ctx.poly_eval(&ct, &coeffs, &k.rlk).unwrap();
    assert_eq!(out.level(), ct.level() - 3);
    let expect: Vec<f64> = x
        .iter()
        .map(|&v| coeffs.iter().rev().fold(0.0, |acc, &c| acc * v + c))
        .collect();
    assert!(max_err(&expect, &dec(&out)[..64]) < 1e-3);

    let low = k.ctx.level_down(&ct, 2).unwrap();
    assert!(matches!(
        k.ctx.poly_eval(&low, &coeffs, &k.rlk),
        Err(CkksError::InsufficientLevels { needed: 3, available: 2 })
    ));
}

#[test]
fn seeded_encryption_is_deterministic() {
    let a = setup(7);
    let b = setup(7);
    assert_eq!(a.sk, b.sk);
    assert_eq!(a.pk, b.pk);
    let ca = a
        .ctx
        .encrypt_values(&a.pk, &[0.3], &mut ChaCha20Rng::seed_from_u64(8))
        .unwrap();
    let cb = b
        .ctx
        .encrypt_values(&b.pk, &[0.3], &mut ChaCha20Rng::seed_from_u64(8))
        .unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn serialization_roundtrip_and_size() {
    let k = setup(9);
    let mut rng = ChaCha20Rng::seed_from_u64(90);
    let ct = k.ctx.encrypt_values(&k.pk, &[0.25, 0.5], &mut rng).unwrap();
    let low = k.ctx.level_down(&ct, 4).unwrap();
    for c in [&ct, &low] {
        let bytes = c.to_bytes();
        assert_eq!(bytes.len(), ciphertext_size(k.ctx.ring_dim(), c.level()));
        assert_eq!(bytes.len(), 32 + 2 * (c.level() + 1) * k.ctx.ring_dim() * 8);
        let back = Ciphertext::from_bytes(&k.ctx, &bytes).unwrap();
        assert_eq!(&back, c);
    }
    let mut bad = ct.to_bytes();
    bad[0] = b'X';
    assert!(Ciphertext::from_bytes(&k.ctx, &bad).is_err());
    let short = &ct.to_bytes()[..100];
    assert!(Ciphertext::from_bytes(&k.ctx, short).is_err());
}
