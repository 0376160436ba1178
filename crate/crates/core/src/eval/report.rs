use std::fmt::Write as _;

use super::ranking::RankedList;

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub scorer: String,
    pub ks: Vec<usize>,
    pub hr: Vec<f64>,
    pub ndcg: Vec<f64>,
    /// Candidates per user, positive included.
    pub pool_size: usize,
    pub users: usize,
    pub seed: u64,
}

impl RankingReport {
    pub fn hr_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.hr[i])
    }

    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.ndcg[i])
    }

    /// Human-readable table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "scorer: {}", self.scorer).unwrap();
        writeln!(s, "users: {}  pool: {}  seed: {}", self.users, self.pool_size, self.seed).unwrap();
        writeln!(s, "{:>6}  {:>8}  {:>8}", "K", "HR", "NDCG").unwrap();
        for (i, k) in self.ks.iter().enumerate() {
            writeln!(s, "{:>6}  {:>8.4}  {:>8.4}", k, self.hr[i], self.ndcg[i]).unwrap();
        }
        s
    }

    /// One `key=value` per line.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "scorer={}", self.scorer).unwrap();
        writeln!(s, "users={}", self.users).unwrap();
        writeln!(s, "pool={}", self.pool_size).unwrap();
        writeln!(s, "seed={}", self.seed).unwrap();
        for (i, k) in self.ks.iter().enumerate() {
            writeln!(s, "HR@{k}={:.4}", self.hr[i]).unwrap();
        }
        for (i, k) in self.ks.iter().enumerate() {
            writeln!(s, "NDCG@{k}={:.4}", self.ndcg[i]).unwrap();
        }
        s
    }
}

/// `user<TAB>position` per line; a miss is written as `-`.
pub fn positions_tsv(lists: &[RankedList]) -> String {
    let mut s = String::new();
    for l in lists {
        match l.position {
            Some(p) => writeln!(s, "{}\t{p}", l.user).unwrap(),
            None => writeln!(s, "{}\t-", l.user).unwrap(),
        }
    }
    s
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_format() {
        let r = RankingReport {
            scorer: "x".into(),
            ks: vec![10],
            hr: vec![0.421],
            ndcg: vec![0.25],
            pool_size: 100,
            users: 3,
            seed: 7,
        };
        assert!(r.to_kv().contains("HR@10=0.4210\n"));
        assert!(r.to_kv().contains("NDCG@10=0.2500\n"));
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_and_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }
}
