import math

import numpy as np
import pytest

from sdebatch import dsl
from sdebatch.dsl import EvalContext


def ctx(y=(0.0,), p=(0.0,), n=None, t=0.0, i=0, N=None):
    y = np.asarray(y, dtype=np.float64)
    return EvalContext(t=t, N=N if N is not None else y.shape[-1], y=y,
                       p=np.asarray(p, dtype=np.float64),
                       n=None if n is None else np.asarray(n, dtype=np.float64),
                       i=i)


def ev(source, **kwargs):
    return dsl.evaluate(dsl.parse(source), ctx(**kwargs))


# ---------------------------------------------------------------------------
# parsing

def test_precedence():
    assert ev("2+3*4") == 14.0
    assert ev("2*3+4") == 10.0
    assert ev("2*3^2") == 18.0
    assert ev("(2+3)*4") == 20.0
    assert ev("2^3^2") == 512.0        # right associative
    assert ev("-2^2") == -4.0          # ^ binds tighter than unary minus
    assert ev("2^-1") == 0.5
    assert ev("8/4/2") == 1.0          # left associative
    assert ev("2 - 3 - 4") == -5.0
    assert ev("--2") == 2.0


def test_functions():
    assert abs(ev("sin(0)") - 0.0) < 1e-15
    assert abs(ev("cos(0)") - 1.0) < 1e-15
    assert abs(ev("exp(1)") - math.e) < 1e-15
    assert abs(ev("ln(exp(2))") - 2.0) < 1e-12
    assert abs(ev("sqrt(16)") - 4.0) < 1e-15
    assert abs(ev("abs(0-3)") - 3.0) < 1e-15
    assert abs(ev("tan(0.5)") - math.tan(0.5)) < 1e-15


def test_indexed_access_and_variables():
    value = ev("sin(y[0]) + 2*p[1]", y=[0.0], p=[0.0, 3.0])
    assert value == 6.0
    assert ev("t", t=2.5) == 2.5
    assert ev("N", y=np.zeros(7), N=7) == 7.0
    assert ev("i", y=np.zeros(3), i=2) == 2.0


def test_parse_sum_node():
    node = dsl.parse("sum(j, sin(y[j]-y[i]))")
    assert isinstance(node, dsl.Sum)
    assert node.var == "j"
    assert isinstance(node.body, dsl.Call)


@pytest.mark.parametrize("source", [
    "2+", "sin(", "(1+2", "y[", "y[0", "sum(j y[j])", "sum(, 1)", "1 2",
])
def test_syntax_errors(source):
    with pytest.raises(dsl.ParseError):
        dsl.parse(source)


def test_unknown_function():
    with pytest.raises(dsl.ParseError, match="unknown function"):
        dsl.parse("sinh(1)")


def test_only_ypn_indexable():
    with pytest.raises(dsl.ParseError, match="can be indexed"):
        dsl.parse("q[0]")


def test_bad_character_position():
    with pytest.raises(dsl.ParseError) as err:
        dsl.parse("1 +\n 2 $ 3")
    assert err.value.line == 2
    assert err.value.col == 4


def test_malformed_sum():
    with pytest.raises(dsl.ParseError, match="index name"):
        dsl.parse("sum(1, 2)")


# ---------------------------------------------------------------------------
# validation

def test_validate_out_of_range_index():
    report = dsl.validate(dsl.parse("y[5]"), nequat=5, nparams=0, nnoise=0)
    assert len(report) == 1
    assert "out of range" in report[0].message


def test_validate_noise_in_drift():
    report = dsl.validate(dsl.parse("n[0]"), nequat=1, nparams=0, nnoise=1, role="drift")
    assert any("drift" in d.message for d in report)
    assert dsl.validate(dsl.parse("n[0]"), nequat=1, nparams=0, nnoise=1,
                        role="diffusion") == []


def test_validate_kuramoto_template():
    from sdebatch.model import KURAMOTO_DRIFT_TEMPLATE, KURAMOTO_DIFFUSION_TEMPLATE
    n = 100
    assert dsl.validate(dsl.parse(KURAMOTO_DRIFT_TEMPLATE),
                        nequat=n, nparams=2 * n + 1, nnoise=n, role="drift") == []
    assert dsl.validate(dsl.parse(KURAMOTO_DIFFUSION_TEMPLATE),
                        nequat=n, nparams=2 * n + 1, nnoise=n) == []


def test_validate_nested_sum_same_index():
    report = dsl.validate(dsl.parse("sum(j, sum(j, y[j]))"), 3, 0, 0)
    assert any("nested sums" in d.message for d in report)
    assert dsl.validate(dsl.parse("sum(j, sum(k, y[j]*y[k]))"), 3, 0, 0) == []


def test_validate_unknown_variable():
    report = dsl.validate(dsl.parse("z + 1"), 1, 0, 0)
    assert any("unknown variable" in d.message for d in report)


def test_validate_sum_shadows_reserved():
    report = dsl.validate(dsl.parse("sum(i, y[i])"), 3, 0, 0)
    assert any("reserved" in d.message for d in report)


@pytest.mark.parametrize("source", ["y[0.5]", "y[t]", "y[i/2]", "y[sqrt(4)]"])
def test_validate_non_integer_index(source):
    assert dsl.validate(dsl.parse(source), 4, 0, 0) != []


# ---------------------------------------------------------------------------
# evaluation

def test_sum_constant_body():
    assert ev("sum(j, 1)", y=np.zeros(7), N=7) == 7.0


def test_sum_body_without_sum_index():
    # each of the N terms is identical when the body ignores the sum index
    assert ev("sum(j, y[i])", y=np.array([2.0, 3.0]), i=1) == 6.0


def test_kuramoto_drift_template_by_hand():
    source = "p[i+1] + (p[0]/N)*sum(j, sin(y[j]-y[i]))"
    y = np.array([0.0, math.pi / 2])
    p = np.array([1.0, 0.1, 0.2, 0.0, 0.0])
    assert abs(ev(source, y=y, p=p, i=0) - 0.6) < 1e-12
    assert abs(ev(source, y=y, p=p, i=1) - (-0.3)) < 1e-12


def test_vectorised_matches_scalar_per_index():
    source = "p[i+1] + (p[0]/N)*sum(j, sin(y[j]-y[i])) + 0.5*i"
    y = np.array([0.3, -1.2, 2.5])
    p = np.array([0.7, 0.1, 0.2, 0.3, 0.0, 0.0, 0.0])
    vec = dsl.evaluate(dsl.parse(source), ctx(y=y, p=p, i=None))
    assert vec.shape == (3,)
    for i in range(3):
        assert abs(vec[i] - ev(source, y=y, p=p, i=i)) < 1e-14


def test_batched_context_matches_per_row():
    source = "p[0]*y[i] + sum(j, y[j])/N"
    y = np.arange(8.0).reshape(2, 4)
    p = np.array([[2.0], [3.0]])
    out = dsl.evaluate(dsl.parse(source), ctx(y=y, p=p, i=None, N=4))
    assert out.shape == (2, 4)
    for row in range(2):
        per_row = dsl.evaluate(dsl.parse(source), ctx(y=y[row], p=p[row], i=None, N=4))
        np.testing.assert_array_equal(out[row], per_row)


def test_noise_access_in_diffusion_context():
    assert ev("p[1+N+i]*n[i]", y=np.zeros(2), p=[1.0, 0.1, 0.2, 0.01, 0.03],
              n=[2.0, -1.0], i=1, N=2) == pytest.approx(-0.03)


def test_runtime_domain_errors():
    with pytest.raises(dsl.DomainError):
        ev("1/y[0]", y=[0.0])
    with pytest.raises(dsl.DomainError):
        ev("ln(y[0])", y=[0.0])
    with pytest.raises(dsl.DomainError):
        ev("ln(0-1)")
    with pytest.raises(dsl.DomainError):
        ev("sqrt(0-1)")


def test_non_strict_mode_propagates_nonfinite():
    node = dsl.parse("ln(y[0])")
    out = dsl.evaluate(node, ctx(y=[-1.0]), strict=False)
    assert math.isnan(out)


def test_runtime_index_out_of_range():
    with pytest.raises(dsl.DomainError, match="out of range"):
        ev("y[i+5]", y=np.zeros(3), i=0)
    with pytest.raises(dsl.DomainError, match="out of range"):
        dsl.evaluate(dsl.parse("y[i+1]"), ctx(y=np.zeros(3), i=None))


def test_evaluate_rejects_bad_equation_index():
    with pytest.raises(ValueError):
        ev("1", y=np.zeros(2), i=5)


def test_evaluation_is_pure():
    node = dsl.parse("sin(y[0])^2 + p[0]*t")
    c = ctx(y=[0.4], p=[2.0], t=1.5)
    assert dsl.evaluate(node, c) == dsl.evaluate(node, c)


# ---------------------------------------------------------------------------
# printer round trip

ROUND_TRIP_SOURCES = [
    "2+3*4",
    "-(y[0]+p[0])",
    "-y[0]^2",
    "(2+3)*(4-1)",
    "2^3^2",
    "(2^3)^2",
    "8/4/2",
    "8/(4/2)",
    "1 - 2 - 3",
    "1 - (2 - 3)",
    "p[i+1] + (p[0]/N)*sum(j, sin(y[j]-y[i]))",
    "sum(j, sum(k, cos(y[j]-y[k])))/N",
    "exp(0-t)*sqrt(abs(y[0]))",
    "p[1+N+i]*n[i]",
]


@pytest.mark.parametrize("source", ROUND_TRIP_SOURCES)
def test_print_parse_round_trip(source):
    node = dsl.parse(source)
    reparsed = dsl.parse(dsl.to_source(node))
    y = np.array([0.3, 0.8, -0.4])
    p = np.arange(1.0, 8.0)
    n = np.array([0.5, -0.25, 1.5])
    for i in range(3):
        c = ctx(y=y, p=p, n=n, t=0.7, i=i, N=3)
        assert dsl.evaluate(reparsed, c) == dsl.evaluate(node, c)


# ---------------------------------------------------------------------------
# model file format

MODEL_TEXT = """
# a linear system with additive noise
nequat=2
nparams=3
nnoise=2

drift: 0 - p[0]*y[i]
diffusion: p[1+i]*n[i]
"""


def test_parse_model_text():
    contents = dsl.parse_model_text(MODEL_TEXT, name="linear")
    assert (contents.nequat, contents.nparams, contents.nnoise) == (2, 3, 2)
    assert contents.drift.startswith("0 - ")
    assert contents.name == "linear"


def test_parse_model_text_errors():
    with pytest.raises(dsl.ParseError, match="missing header"):
        dsl.parse_model_text("drift: 1\ndiffusion: 0\n")
    with pytest.raises(dsl.ParseError, match="missing 'diffusion'"):
        dsl.parse_model_text("nequat=1\nnparams=0\nnnoise=0\ndrift: 1\n")
    with pytest.raises(dsl.ParseError, match="duplicate"):
        dsl.parse_model_text("nequat=1\nnequat=2\nnparams=0\nnnoise=0\n"
                             "drift: 1\ndiffusion: 0\n")
    with pytest.raises(dsl.ParseError, match="unrecognised"):
        dsl.parse_model_text("nequat=1\nwhat is this\n")


def test_load_model_file(tmp_path):
    path = tmp_path / "linear.model"
    path.write_text(MODEL_TEXT, encoding="utf-8")
    contents = dsl.load_model_file(path)
    assert contents.name == "linear"
    assert contents.nnoise == 2
