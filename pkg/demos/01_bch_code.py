"""
The BCH(63, 10) payload code
============================

Ten payload bits become a 63-bit codeword that survives any 13 flipped bits.
"""
import numpy as np

from timemark import gf_bch

code = gf_bch.build_code()
print(f"n={code.n} k={code.k} t={code.t} d_min={code.d_min}")
print("generator polynomial (hex):", hex(code.generator))

# encode a random info word; the first 10 bits are the info word itself
rng = np.random.default_rng(0)
info = rng.integers(0, 2, 10, dtype=np.uint8)
word = gf_bch.encode(info)
print("info    ", "".join(map(str, info)))
print("codeword", gf_bch.bits_to_hex(word))

# flip 13 random positions and decode
noisy = word.copy()
noisy[rng.choice(63, 13, replace=False)] ^= 1
out = gf_bch.decode(noisy)
print("decoded ", "".join(map(str, out.info)), out.status.name, "errors fixed:", out.errors_corrected)

# one flip more than the radius: the decoder either refuses or lands elsewhere
noisy[np.flatnonzero(noisy == word)[0]] ^= 1
out = gf_bch.decode(noisy)
print("14 errors ->", out.status.name)

# the exhaustive oracle agrees with the algebraic decoder inside the radius
idx, dist = gf_bch.nearest_codeword(gf_bch.encode(info) ^ np.eye(63, dtype=np.uint8)[5])
print("nearest codeword index", idx, "distance", dist, "==", gf_bch.bits_to_int(info))
