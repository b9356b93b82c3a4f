"""Independent, from-scratch oracles used by the test suite.

These deliberately avoid the library's data structures: probabilities are
recomputed per query by scanning raw counts, in exact rational arithmetic.
Slow and simple on purpose.
"""

from collections import Counter
from fractions import Fraction

BOS, EOS, UNK = "<s>", "</s>", "<unk>"


def kn_tables(sentences, order):
    """Raw top-order counts and continuation tables, all as Counters over tuples."""
    token_counts = Counter(t for s in sentences for t in s)
    vocab = {t for t, c in token_counts.items() if c >= 2} | {BOS, EOS, UNK}

    def m(t):
        return t if t in vocab else UNK

    grams = Counter()
    for s in sentences:
        padded = [BOS] * (order - 1) + [m(t) for t in s] + [EOS]
        for i in range(order - 1, len(padded)):
            grams[tuple(padded[i - order + 1:i + 1])] += 1
    tables = {order: grams}
    for n in range(order - 1, 0, -1):
        cont = Counter()
        for g in tables[n + 1]:
            cont[g[1:]] += 1
        tables[n] = cont
    return vocab, tables


def kn_oracle_prob(sentences, order, discount, context, word, exact=False):
    """Interpolated Kneser-Ney P(word | context), recomputed from raw counts.

    With ``exact=True`` the whole recursion runs in Fractions (discount must
    be exactly representable in binary, e.g. 0.75).
    """
    vocab, tables = kn_tables(sentences, order)
    vpred = sorted(vocab - {BOS})
    D = Fraction(discount) if exact else discount

    def m(t):
        return t if t in vocab else UNK

    def p(n, ctx, w):
        if n == 1:
            table = {g[0]: c for g, c in tables[1].items()}
            total = sum(table.values())
            uniform = (Fraction(1, len(vpred)) if exact else 1.0 / len(vpred))
            if total == 0:
                return uniform
            c = table.get(w, 0)
            lam = D * len(table) / total
            return max(c - D, 0 * D) / total + lam * uniform
        ctx_n = ctx[-(n - 1):]
        dist = {g[-1]: c for g, c in tables[n].items() if g[:-1] == ctx_n}
        total = sum(dist.values())
        if total == 0:
            return p(n - 1, ctx, w)
        c = dist.get(w, 0)
        lam = D * len(dist) / total
        return max(c - D, 0 * D) / total + lam * p(n - 1, ctx, w)

    if word == BOS:
        return 0.0
    ctx = tuple(m(t) for t in context)[-(order - 1):]
    if len(ctx) < order - 1:
        ctx = (BOS,) * (order - 1 - len(ctx)) + ctx
    out = p(order, ctx, m(word))
    return float(out)


def kn_oracle_cloze_windows(sentences, order, discount, left, right, candidate):
    """Window-enumeration oracle for cloze scoring, independent of the model.

    Enumerates every ``order``-gram over the padded filled-in prompt that
    covers the candidate position and multiplies oracle probabilities.
    """
    padded = [BOS] * (order - 1) + list(left) + [candidate] + list(right) + [EOS]
    pos = (order - 1) + len(left)
    prod = 1.0
    for start in range(len(padded) - order + 1):
        if start <= pos <= start + order - 1:
            window = padded[start:start + order]
            prod *= kn_oracle_prob(sentences, order, discount,
                                   list(window[:-1]), window[-1])
    return prod


def pearson_oracle(x, y):
    """Textbook Pearson r with plain Python floats."""
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    return cov / (vx * vy) ** 0.5


def ols_normal_equations(X, y):
    """Solve X'X b = X'y by Gaussian elimination with partial pivoting."""
    k = len(X[0])
    A = [[sum(X[i][a] * X[i][b] for i in range(len(X))) for b in range(k)]
         for a in range(k)]
    rhs = [sum(X[i][a] * y[i] for i in range(len(X))) for a in range(k)]
    for col in range(k):
        pivot = max(range(col, k), key=lambda r: abs(A[r][col]))
        A[col], A[pivot] = A[pivot], A[col]
        rhs[col], rhs[pivot] = rhs[pivot], rhs[col]
        for r in range(col + 1, k):
            f = A[r][col] / A[col][col]
            for c in range(col, k):
                A[r][c] -= f * A[col][c]
            rhs[r] -= f * rhs[col]
    beta = [0.0] * k
    for r in range(k - 1, -1, -1):
        beta[r] = (rhs[r] - sum(A[r][c] * beta[c] for c in range(r + 1, k))) / A[r][r]
    return beta
