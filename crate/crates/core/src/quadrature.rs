//! Symmetric degree-2 rules on the reference simplices, in barycentric form.
//! Weights sum to one; callers multiply by the simplex measure.

/// Two-point Gauss rule on a segment (exact to degree 3).
pub const EDGE: [([f64; 2], f64); 2] = [
    ([0.788_675_134_594_812_9, 0.211_324_865_405_187_1], 0.5),
    ([0.211_324_865_405_187_1, 0.788_675_134_594_812_9], 0.5),
];

/// Three-point interior rule on a triangle (exact to degree 2).
pub const TRIANGLE: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

const TET_A: f64 = 0.585_410_196_624_968_5;
const TET_B: f64 = 0.138_196_601_125_010_5;

/// Four-point rule on a tet (exact to degree 2).
pub const TET: [([f64; 4], f64); 4] = [
    ([TET_A, TET_B, TET_B, TET_B], 0.25),
    ([TET_B, TET_A, TET_B, TET_B], 0.25),
    ([TET_B, TET_B, TET_A, TET_B], 0.25),
    ([TET_B, TET_B, TET_B, TET_A], 0.25),
];
