//! Paired t-test reference values computed offline with
//! `scipy.stats.ttest_rel` on the vectors produced by [`vectors`].

/// `splitmix64`, the generator both sides use to build the vectors.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit(case: u64, stream: u64, i: u64) -> f64 {
    (splitmix64(case * 1_000_003 + stream * 10_007 + i) >> 11) as f64 * 2f64.powi(-53)
}

/// The paired samples of reference case `case`.
pub fn vectors(case: u64) -> (Vec<f64>, Vec<f64>) {
    let n = 3 + splitmix64(case * 1_000_003) % 37;
    let shift = unit(case, 3, 0) - 0.5;
    let a: Vec<f64> = (0..n).map(|i| unit(case, 1, i)).collect();
    let b = a.iter().enumerate().map(|(i, x)| x + shift + 0.6 * (unit(case, 2, i as u64) - 0.5)).collect();
    (a, b)
}

/// `(n, statistic, p_value)` per case.
pub const T_TESTS: [(usize, f64, f64); 50] = [
    (36, -13.380673965847881, 2.516241805661313e-15),
    (32, 6.096163294177997, 9.336052536046003e-07),
    (29, -9.008856917458267, 9.14804645615808e-10),
    (36, -1.1386167729387495, 0.26259681861748363),
    (27, -5.947112693973297, 2.8220027622735157e-06),
    (18, -10.11978658400663, 1.2999473063057098e-08),
    (15, 0.25964564236980753, 0.7989163903255887),
    (28, -7.247419738009796, 8.540943234493508e-08),
    (15, 3.1616078767625018, 0.006929873752724434),
    (26, -5.3264344703496995, 1.605277344037681e-05),
    (34, -11.510929679514769, 4.264730265185844e-13),
    (34, -1.974310191318189, 0.056764588964262105),
    (25, 12.547364862035224, 4.936865749076647e-12),
    (20, -10.19075825431409, 3.8785199163556995e-09),
    (20, -4.139098684950827, 0.0005576768969971631),
    (10, 3.41556891391424, 0.007681603448821225),
    (39, 18.01816541746816, 3.2922282516822967e-20),
    (36, 16.723475812141746, 2.881120558171736e-18),
    (27, 12.721410730342807, 1.1369751558708713e-12),
    (28, -12.89244187072816, 4.724751239346864e-13),
    (11, 7.0952333727107435, 3.314196636455618e-05),
    (22, 13.106472854200897, 1.4079469406607724e-11),
    (14, -2.103756051560819, 0.055433321563781585),
    (20, 8.445728748027857, 7.421834887924895e-08),
    (9, -6.553941696267586, 0.00017773875254006212),
    (29, 0.17584656540463744, 0.8616800871349717),
    (22, 14.92514017418565, 1.1848448693936968e-12),
    (23, -5.809665537941128, 7.610304141052487e-06),
    (26, 8.205308609006718, 1.475839780895692e-08),
    (35, 4.279177444364755, 0.00014447367099849247),
    (4, 9.324354652500643, 0.002611668603570067),
    (31, 7.254810610062792, 4.4652400639229775e-08),
    (4, -3.8173529632779597, 0.031629964779787356),
    (26, -7.604235825538918, 5.850706559995088e-08),
    (22, 12.436760835130011, 3.7555760209149625e-11),
    (15, -9.77213468798549, 1.2418757391739398e-07),
    (30, -7.285024329019654, 5.049806922986893e-08),
    (12, -4.136622036885516, 0.0016534696340824663),
    (5, -4.807489612206923, 0.008601035883203705),
    (4, -0.46084142748057305, 0.6762666050277693),
    (30, -16.972049019070813, 1.3330223275240673e-16),
    (18, -4.263625699658054, 0.0005244923652592033),
    (28, 1.980229610672776, 0.057952402262018074),
    (37, 0.6122995638469113, 0.5441879668001781),
    (34, -16.310979389473584, 2.3388982780735302e-17),
    (11, 0.3091277889466893, 0.7635689528996918),
    (5, 3.9910039162828506, 0.016251329797725887),
    (24, 1.1931553301601805, 0.24497173260617344),
    (38, 16.44516404015554, 1.346833915956388e-18),
    (4, -2.2678690580461804, 0.10813743135739658),
];
