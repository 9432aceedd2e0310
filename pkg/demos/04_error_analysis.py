"""
How often does decoding go wrong?
=================================

Closed-form error rates, with tails kept in log space so that numbers like
1e-44 come out exactly instead of rounding to zero.
"""
import math

from timemark.analysis import AnalysisParams, analyze, exact_tail_upper, log_tail_upper

report = analyze()
print(report.table())

# a skewed model puts less mass in the greenlist; the guarantees weaken but hold
print()
print(analyze(AnalysisParams(green_mass=0.35)).table())

# log-space tail vs exact rational arithmetic
lt = log_tail_upper(315, 0.5, 205)
ex = exact_tail_upper(315, 0.5, 205)
print()
print(f"Pr[Bin(315, 1/2) >= 205]: log-space {math.exp(lt):.12e}, exact {float(ex):.12e}")

# sweep delta
for delta in (1.0, 1.5, 2.0, 2.5, 3.0):
    r = analyze(AnalysisParams(delta=delta))
    print(f"delta={delta:3.1f}  p_tok={r.p_tok.value:.4f}  log10(1-p_R)={r.payload_failure.log10():8.2f}"
          f"  log10(false rejection)={r.false_rejection.log10():8.2f}")
