import math

import numpy as np
import pytest

import helsonzeta as hz

# Small-scale transform settings shared by the unit tests: same sample step
# as the production default (so the u-range still spans ~800) but a far
# cheaper FFT; the coarse half-width needs a relaxed tail tolerance.
SMALL_T = 256.0
SMALL_N = 1 << 16
SMALL_TOL = {"tail": 5e-3}


def small_kernel(model, sieve_limit, as_real=False):
    return hz.build_kernel(model, half_width=SMALL_T, n=SMALL_N,
                           sieve_limit=sieve_limit, as_real=as_real,
                           tolerances=SMALL_TOL)


@pytest.fixture(scope="session")
def spec_b_small():
    return hz.validate_spec(hz.spec_from_json_dict({
        "zeros": [{"re": 0.75, "im": 5.0, "mult": 1}],
        "poles": [{"re": 0.85, "im": 2.0, "mult": 1},
                  {"re": 0.6, "im": -3.0, "mult": 1}],
        "alphabet": "cubic",
        "regime": "unconditional",
        "sieve_limit": 100_000,
    }))


@pytest.fixture(scope="session")
def spec_a_small():
    return hz.validate_spec(hz.spec_from_json_dict({
        "zeros": [{"re": 0.75, "im": 5.0, "mult": 1},
                  {"re": 0.75, "im": -5.0, "mult": 1}],
        "poles": [{"re": 0.85, "im": 2.0, "mult": 1},
                  {"re": 0.85, "im": -2.0, "mult": 1}],
        "alphabet": "real",
        "regime": "unconditional",
        "sieve_limit": 100_000,
    }))


@pytest.fixture(scope="session")
def model_b_small(spec_b_small):
    return hz.assemble(hz.build_residue_targets(spec_b_small), alpha=spec_b_small.alpha)


@pytest.fixture(scope="session")
def model_a_small(spec_a_small):
    return hz.assemble(hz.build_residue_targets(spec_a_small), alpha=spec_a_small.alpha)


@pytest.fixture(scope="session")
def kernel_b_small(model_b_small, spec_b_small):
    return small_kernel(model_b_small, spec_b_small.sieve_limit)


@pytest.fixture(scope="session")
def kernel_a_small(model_a_small, spec_a_small):
    return small_kernel(model_a_small, spec_a_small.sieve_limit, as_real=True)


@pytest.fixture(scope="session")
def single_target_model():
    """One real target (0.75, residue -1): the classic worked example."""
    spec = hz.validate_spec(hz.spec_from_json_dict({
        "zeros": [{"re": 0.75, "im": 0.0, "mult": 1}],
        "poles": [],
        "alphabet": "real",
        "regime": "unconditional",
        "sieve_limit": 10_000,
    }))
    return hz.assemble(hz.build_residue_targets(spec), alpha=spec.alpha)


@pytest.fixture(scope="session")
def built_b_small(spec_b_small, kernel_b_small):
    table, log = hz.run_pipeline(spec_b_small, kernel_b_small)
    return table, log


@pytest.fixture(scope="session")
def built_a_small(spec_a_small, kernel_a_small):
    table, log = hz.run_pipeline(spec_a_small, kernel_a_small)
    return table, log
