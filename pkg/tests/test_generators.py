import pytest

from santaclaus.generators import FAMILIES, generate
from santaclaus.instance import InputError, check_submodular, instance_to_json
from santaclaus.oracle import brute_opt


@pytest.mark.parametrize("family", ["planted-additive", "planted-coverage",
                                    "adversarial-private-resource"])
@pytest.mark.parametrize("seed", range(5))
def test_sidecar_opt_is_exact(family, seed):
    gen = generate(family, 3, 6 if family != "adversarial-private-resource" else 7, seed)
    value, _ = brute_opt(gen.instance)
    assert value == pytest.approx(gen.opt, abs=1e-12)
    assert gen.instance.min_value(gen.planted) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("family", FAMILIES)
def test_deterministic(family):
    a = instance_to_json(generate(family, 3, 10, 11).instance)
    b = instance_to_json(generate(family, 3, 10, 11).instance)
    c = instance_to_json(generate(family, 3, 10, 12).instance)
    assert a == b and a != c


@pytest.mark.parametrize("family", FAMILIES)
def test_valuations_are_submodular(family):
    inst = generate(family, 3, 7, 3).instance
    assert all(check_submodular(inst.valuations[p]).ok for p in inst.players)


def test_bad_arguments():
    with pytest.raises(InputError):
        generate("nope", 2, 3, 0)
    with pytest.raises(InputError):
        generate("planted-additive", 0, 3, 0)
    with pytest.raises(InputError):
        generate("adversarial-private-resource", 3, 4, 0)
