import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from winmp.benchgen import gen_example1
from winmp.estimator import WindowStrategySynthesizer, check_eval, check_mdp
from winmp.io import format_mdp
from winmp.mdp import MdpError


def test_params_roundtrip_and_clone():
    est = WindowStrategySynthesizer(eval="threshold:2", window=4, memory=3, steps=7, random_state=11)
    params = est.get_params()
    assert params["memory"] == 3 and params["eval"] == "threshold:2" and params["random_state"] == 11
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(lr=0.05)
    assert est.lr == 0.05


def test_fit_sets_attributes_and_scores(tmp_path):
    mdp = gen_example1()[0]
    path = tmp_path / "ex.mdp"
    path.write_text(format_mdp(mdp))
    est = WindowStrategySynthesizer(eval="l1target:1,1;penalty=5", window=8, memory=1, steps=50, restarts=1)
    assert est.fit(str(path)) is est
    assert est.wval_ == pytest.approx(est.evaluate()["wval"])
    assert est.score() == pytest.approx(-est.wval_)
    assert len(est.trace_) == 50 and est.trace_.min() == est.wval_
    assert est.strategy_.problems() == []


def test_fit_is_seeded():
    mdp = gen_example1()[0]
    a = WindowStrategySynthesizer(eval="l1target:1,1;penalty=5", window=8, steps=20, random_state=4).fit(mdp)
    b = WindowStrategySynthesizer(eval="l1target:1,1;penalty=5", window=8, steps=20, random_state=4).fit(mdp)
    assert np.array_equal(a.result_.params, b.result_.params)


def test_validation_errors():
    mdp = gen_example1()[0]
    with pytest.raises(NotFittedError):
        WindowStrategySynthesizer().evaluate()
    with pytest.raises(ValueError):
        WindowStrategySynthesizer(eval="l1target:1,1;penalty=5", window=0).fit(mdp)
    with pytest.raises(ValueError):
        WindowStrategySynthesizer(eval="l1target:1,1,1;penalty=5", window=3).fit(mdp)
    with pytest.raises(TypeError):
        check_mdp(42)
    with pytest.raises(TypeError):
        check_eval(3.0)
    with pytest.raises(MdpError):
        check_mdp("mdp payoffs=1\nvertex a N pay=1\n")
