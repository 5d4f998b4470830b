import numpy as np
import pytest

from solsa.dynamics import NetworkState, network_forward_step
from solsa.learning import LearnerState, accumulate_step, per_step_loss


def run_solsa_sequence(params, frames, label, *, gamma=0.9, adapt_kernels=True, record=None):
    """Accumulate SOLSA gradients over a whole sequence without applying them.

    If ``record`` is a list, a dict of per-step quantities is appended to it.
    """
    learner = LearnerState.zeros(params, gamma=gamma, adapt_kernels=adapt_kernels)
    state = NetworkState.zeros(params)
    for frame in frames:
        state, out = network_forward_step(state, frame, params)
        loss = per_step_loss(out, label, params.output_dim)
        accumulate_step(learner, state, loss.dE_dO, params)
        if record is not None:
            record.append(dict(
                mu=[m.copy() for m in learner.mu],
                F=[np.array(ls.F) for ls in state.layers],
                F_prev=[np.array(ls.F_prev) for ls in state.layers],
                x=[ls.x.copy() for ls in state.layers],
                eps=[e.copy() for e in learner.eps],
                e=[e.copy() for e in learner.eligibility],
            ))
    return learner


@pytest.fixture(scope="session")
def solsa_sequence():
    return run_solsa_sequence


def relative_error(a, b):
    a, b = np.concatenate([x.ravel() for x in a]), np.concatenate([x.ravel() for x in b])
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


@pytest.fixture(scope="session")
def rel_err():
    return relative_error


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def record_criterion(request):
    """Record one acceptance criterion's outcome for the end-of-run summary."""
    results = request.config.stash.setdefault(_CRITERIA, {})

    def record(number, title, passed, detail=""):
        results[number] = (title, bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_CRITERIA, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, passed, detail = results[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number!s:>3}. {title}: {detail}")
