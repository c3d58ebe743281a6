"""Constructive characters with prescribed zeros and poles for Helson zeta
functions.

From finite multisets of zeros and poles inside the critical strip, the
pipeline computes a completely multiplicative unimodular character on the
primes (values in cubic roots of unity, +-1 in the symmetric mode, or l-th
roots of unity) whose twisted zeta function continues past Re s = 1 with
exactly the prescribed singularities, together with verification for every
quantitative step:

  spectrum   -- validate the prescription, canonical order, residues
  meromorph  -- pole-atom series with certified budgets and residues
  mellin     -- boundary trace, Fourier transform, tabulated Mellin kernel
  primes     -- segmented sieve and the block schedule (both regimes)
  assigner   -- the greedy per-prime character walk, logs, persistence
  evaluate   -- Euler products, log-derivative sums, convergence diagnostics
  cli        -- build / verify / eval / report commands over JSON configs
"""

from .assigner import (BlockLog, BlockState, CharacterTable, choose_cubic,
                       choose_real, choose_root, run_pipeline)
from .evaluate import (ConvergenceReport, EvalParams, difference_series,
                       log_deriv_prime_sum, prime_power_tail, residual_at,
                       zeta_value)
from .mellin import (BoundaryTrace, KernelTable, build_kernel,
                     default_roundtrip_samples, kernel_from_trace,
                     roundtrip_report, sample_boundary)
from .meromorph import MeromorphicTarget, PoleAtom, assemble, choose_exponent
from .primes import (BlockSchedule, PrimeSegment, next_boundary, primes_upto,
                     segmented_sieve, simple_sieve)
from .spectrum import (ResidueTarget, SpecValidationError, SpectrumSpec,
                       StripPoint, build_residue_targets, spec_from_json,
                       spec_from_json_dict, validate_spec)

__version__ = "0.1.0"
