import pytest

from gromov_markov import TypeEngine, enumerate_ball, free_group, integers, modular_group


@pytest.fixture(scope="session")
def F2():
    return free_group(2)


@pytest.fixture(scope="session")
def Z():
    return integers()


@pytest.fixture(scope="session")
def Z2Z3():
    return modular_group()


@pytest.fixture(scope="session")
def golden(F2, Z, Z2Z3):
    return {"F2": F2, "Z": Z, "Z2*Z3": Z2Z3}


@pytest.fixture(scope="session")
def engines(golden):
    return {k: TypeEngine(G) for k, G in golden.items()}


@pytest.fixture(scope="session")
def balls(golden):
    return {k: enumerate_ball(G, 8) for k, G in golden.items()}


# acceptance summary: one PASS/FAIL line per criterion


class Criterion:
    def __init__(self):
        self.detail = ""


_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def criterion():
    return Criterion()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = mark.args
    c = item.funcargs.get("criterion")
    detail = c.detail if c is not None else ""
    _ACCEPTANCE[number] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        verdict, title, detail = _ACCEPTANCE[n]
        line = f"{verdict} {n:2d} {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
