use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

/// Tile sizes per cache level, innermost first, keyed by loop name.
pub type TileLevels = [BTreeMap<String, i64>];

/// Resolves the sizes of `names` on every level. Loops a level does not
/// mention get their full extent (a single tile). Sizes are clamped to
/// `1..=extent`.
pub fn level_sizes<const N: usize>(levels: &TileLevels, names: [&str; N], extents: [usize; N]) -> Vec<[usize; N]> {
    levels
        .iter()
        .map(|level| {
            core::array::from_fn(|d| {
                let extent = extents[d].max(1);
                match level.get(names[d]) {
                    Some(&t) => (t.max(1) as usize).min(extent),
                    None => extent,
                }
            })
        })
        .collect()
}

/// Visits the tiles of an `N`-dimensional box.
///
/// `levels` is innermost first. The outermost level's tiles are visited in
/// row-major order (last dimension fastest), each split recursively by the
/// next level in. Partial tiles at the upper bounds are clamped. With no
/// levels the whole box is a single tile.
pub fn for_each_tile<const N: usize, F: FnMut([Range<usize>; N])>(
    ranges: [Range<usize>; N],
    levels: &[[usize; N]],
    f: &mut F,
) {
    if ranges.iter().any(|r| r.is_empty()) {
        return;
    }
    let Some((outer, inner)) = levels.split_last() else {
        f(ranges);
        return;
    };
    let mut origin: [usize; N] = core::array::from_fn(|d| ranges[d].start);
    loop {
        let tile: [Range<usize>; N] =
            core::array::from_fn(|d| origin[d]..(origin[d] + outer[d].max(1)).min(ranges[d].end));
        for_each_tile(tile, inner, f);
        let mut d = N;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            origin[d] += outer[d].max(1);
            if origin[d] < ranges[d].end {
                break;
            }
            origin[d] = ranges[d].start;
        }
    }
}
