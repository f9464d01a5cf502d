//! Pairwise attack between labelled pieces on a square board.

use crate::logic::LabelId;

/// Piece labels in declaration order.
pub const PIECES: [&str; 6] = ["rook", "pawn", "bishop", "king", "knight", "queen"];

pub const ROOK: LabelId = 0;
pub const PAWN: LabelId = 1;
pub const BISHOP: LabelId = 2;
pub const KING: LabelId = 3;
pub const KNIGHT: LabelId = 4;
pub const QUEEN: LabelId = 5;

pub type Square = (i64, i64);

pub const SOURCE: &str = "\
% Attack relations between pieces. Pieces sit at at(P, X, Y); pawns capture towards +y.
@concept rook/1.
@concept pawn/1.
@concept bishop/1.
@concept king/1.
@concept knight/1.
@concept queen/1.
@target attack/0.

attack :- knight(A), at(A, X1, Y1), at(B, X2, Y2), A \\= B, lshape(X1, Y1, X2, Y2).
attack :- rook(A), at(A, X1, Y1), at(B, X2, Y2), A \\= B, line(X1, Y1, X2, Y2).
attack :- bishop(A), at(A, X1, Y1), at(B, X2, Y2), A \\= B, diag(X1, Y1, X2, Y2).
attack :- queen(A), at(A, X1, Y1), at(B, X2, Y2), A \\= B, line_or_diag(X1, Y1, X2, Y2).
attack :- king(A), at(A, X1, Y1), at(B, X2, Y2), A \\= B, near(X1, Y1, X2, Y2).
attack :- pawn(A), at(A, X1, Y1), at(B, X2, Y2), A \\= B, pawn_capture(X1, Y1, X2, Y2).

lshape(X1, Y1, X2, Y2) :- left(X1, X2, DX), fwd(Y1, Y2, DY), S is DX * DX + DY * DY, S = 5.
line(X1, Y1, X2, Y2) :- left(X1, X2, DX), fwd(Y1, Y2, DY), 0 is DX * DY, S is DX * DX + DY * DY, S > 0.
diag(X1, Y1, X2, Y2) :- left(X1, X2, DX), fwd(Y1, Y2, DY), DX = DY, DX \\= 0.
diag(X1, Y1, X2, Y2) :- left(X1, X2, DX), fwd(Y1, Y2, DY), S is DX + DY, S = 0, DX \\= 0.
line_or_diag(X1, Y1, X2, Y2) :- line(X1, Y1, X2, Y2).
line_or_diag(X1, Y1, X2, Y2) :- diag(X1, Y1, X2, Y2).
near(X1, Y1, X2, Y2) :- left(X1, X2, DX), fwd(Y1, Y2, DY), S is DX * DX + DY * DY, S = 1.
near(X1, Y1, X2, Y2) :- left(X1, X2, DX), fwd(Y1, Y2, DY), S is DX * DX + DY * DY, S = 2.
pawn_capture(X1, Y1, X2, Y2) :- left(X1, X2, 1), fwd(Y1, Y2, 1).
pawn_capture(X1, Y1, X2, Y2) :- left(X1, X2, -1), fwd(Y1, Y2, 1).

left(X1, X2, D) :- D is X2 - X1.
fwd(Y1, Y2, D) :- D is Y2 - Y1.
";

/// Whether a piece labelled `piece` on `from` attacks `to`, by coordinate arithmetic.
pub fn attacks(piece: LabelId, from: Square, to: Square) -> bool {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let (ax, ay) = (dx.abs(), dy.abs());
    let straight = (dx == 0) != (dy == 0);
    let diagonal = ax == ay && ax != 0;
    match piece {
        ROOK => straight,
        PAWN => dy == 1 && ax == 1,
        BISHOP => diagonal,
        KING => ax.max(ay) == 1,
        KNIGHT => (ax, ay) == (1, 2) || (ax, ay) == (2, 1),
        QUEEN => straight || diagonal,
        _ => panic!("unknown piece label {piece}"),
    }
}

/// Whether any ordered pair of distinct pieces attacks.
pub fn any_attack(labels: &[LabelId], squares: &[Square]) -> bool {
    (0..labels.len()).any(|a| {
        (0..labels.len()).any(|b| a != b && attacks(labels[a], squares[a], squares[b]))
    })
}
