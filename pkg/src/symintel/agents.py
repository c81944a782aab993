"""Reference agents and the string registry used by the CLI.

Registry ids::

    constant:<action>   uniform   cycle   obs-copy   greedy   winstay
    dual:<id>   mixture:<id>   permute:<images>:<id>   permute-obs:<images>:<id>

``<images>`` lists the image of each canonical symbol, e.g. ``a1,a0``.
"""

from __future__ import annotations

from fractions import Fraction

from .framework import (
    ONE,
    ZERO,
    Agent,
    History,
    Permutation,
    dual_agent,
    permute_agent,
    permute_observations_agent,
    point_mass,
    uniform_measure,
)
from .spaces import Space


class ConstantAgent(Agent):
    ignores_rewards = True

    def __init__(self, space: Space, action: str):
        if action not in space.action_index:
            raise KeyError(f"unknown action {action!r}")
        super().__init__(space, f"constant:{action}")
        self.action = action
        self._m = point_mass(action)

    def _measure(self, s: History) -> dict:
        return self._m


class UniformAgent(Agent):
    ignores_rewards = True

    def __init__(self, space: Space):
        super().__init__(space, "uniform")
        self._m = uniform_measure(space.actions)

    def _measure(self, s: History) -> dict:
        return self._m


class CycleAgent(Agent):
    """Plays the actions in canonical order, one per round."""

    ignores_rewards = True

    def __init__(self, space: Space):
        super().__init__(space, "cycle")

    def _measure(self, s: History) -> dict:
        acts = self.space.actions
        return point_mass(acts[(len(s) // 3) % len(acts)])


class ObservationCopyAgent(Agent):
    """Chooses the action whose index matches the latest observation's index."""

    ignores_rewards = True

    def __init__(self, space: Space):
        super().__init__(space, "obs-copy")

    def _measure(self, s: History) -> dict:
        acts = self.space.actions
        return point_mass(acts[self.space.observation_index[s[-2]] % len(acts)])


class GreedyTabularAgent(Agent):
    """Picks the action with the highest average reward received right after it.

    Untried actions score ``untried`` (0 by default); ties go to the earliest
    action in canonical order. The rule is a pure function of the history.
    """

    def __init__(self, space: Space, untried: Fraction = ZERO):
        super().__init__(space, "greedy")
        self.untried = Fraction(untried)

    def _measure(self, s: History) -> dict:
        totals: dict[str, Fraction] = {}
        counts: dict[str, int] = {}
        for i in range(2, len(s) - 2, 3):
            a, r = s[i], s[i + 2]
            totals[a] = totals.get(a, ZERO) + r
            counts[a] = counts.get(a, 0) + 1
        best, best_score = None, None
        for a in self.space.actions:
            score = totals[a] / counts[a] if a in counts else self.untried
            if best_score is None or score > best_score:
                best, best_score = a, score
        return point_mass(best)


class WinStayAgent(Agent):
    """Win-stay, lose-shift: repeat the last action unless the last reward was negative."""

    def __init__(self, space: Space):
        super().__init__(space, "winstay")

    def _measure(self, s: History) -> dict:
        acts = self.space.actions
        if len(s) < 5:
            return point_mass(acts[0])
        last = s[-3]
        if s[-1] >= 0:
            return point_mass(last)
        return point_mass(acts[(self.space.action_index[last] + 1) % len(acts)])


class CoinMixtureAgent(Agent):
    """Commit to ``pi`` with probability ``p_heads``, otherwise to ``dual(pi)``, for a whole interaction.

    Realised per history as the posterior-weighted mixture

        rho(a|s) = (p L(s) pi(a|s) + (1-p) Lbar(s) pibar(a|s)) / (p L(s) + (1-p) Lbar(s))

    where ``L`` and ``Lbar`` are the probabilities the two agents assign to the
    actions already in ``s``. This is exactly the trajectory-level coin flip,
    so ``V(rho) = p V(pi) + (1-p) V(pibar)`` in every environment. Histories
    impossible under both fall back to the prior mixture.
    """

    def __init__(self, pi: Agent, p_heads: Fraction = Fraction(1, 2)):
        super().__init__(pi.space, f"mixture:{pi.name}" if p_heads == Fraction(1, 2) else f"mixture@{p_heads}:{pi.name}")
        self.pi = pi
        self.pibar = dual_agent(pi)
        self.p = Fraction(p_heads)
        self.ignores_rewards = pi.ignores_rewards
        self._lik: dict = {}

    def _likelihood(self, s: History) -> tuple[Fraction, Fraction]:
        if len(s) <= 2:
            return ONE, ONE
        got = self._lik.get(s)
        if got is None:
            t, a = s[:-3], s[-3]
            lp, lq = self._likelihood(t)
            got = (lp * self.pi.prob(a, t), lq * self.pibar.prob(a, t))
            self._lik[s] = got
        return got

    def _measure(self, s: History) -> dict:
        lp, lq = self._likelihood(s)
        wp, wq = self.p * lp, (1 - self.p) * lq
        if wp + wq == 0:
            wp, wq = self.p, 1 - self.p
        mp, mq = self.pi.measure(s), self.pibar.measure(s)
        total = wp + wq
        out = {}
        for a in self.space.actions:
            v = (wp * mp.get(a, ZERO) + wq * mq.get(a, ZERO)) / total
            if v:
                out[a] = v
        return out


def make_constant(space: Space, action: str) -> Agent:
    return ConstantAgent(space, action)


def make_uniform_random(space: Space) -> Agent:
    return UniformAgent(space)


def make_greedy_tabular(space: Space, untried: Fraction = ZERO) -> Agent:
    return GreedyTabularAgent(space, untried)


def make_coin_mixture(pi: Agent, p_heads: Fraction = Fraction(1, 2)) -> Agent:
    return CoinMixtureAgent(pi, p_heads)


# -- registry ------------------------------------------------------------------


class UnknownAgent(KeyError):
    pass


def make_agent(space: Space, agent_id: str) -> Agent:
    head, _, rest = agent_id.partition(":")
    if head == "constant":
        return ConstantAgent(space, rest)
    if head == "uniform" and not rest:
        return UniformAgent(space)
    if head == "cycle" and not rest:
        return CycleAgent(space)
    if head == "obs-copy" and not rest:
        return ObservationCopyAgent(space)
    if head == "greedy" and not rest:
        return GreedyTabularAgent(space)
    if head == "winstay" and not rest:
        return WinStayAgent(space)
    if head == "dual" and rest:
        agent = dual_agent(make_agent(space, rest))
    elif head == "mixture" and rest:
        agent = CoinMixtureAgent(make_agent(space, rest))
    elif head in ("permute", "permute-obs") and rest:
        images, _, inner = rest.partition(":")
        alphabet = space.actions if head == "permute" else space.observations
        P = Permutation.from_images(alphabet, images.split(","))
        wrap = permute_agent if head == "permute" else permute_observations_agent
        agent = wrap(P, make_agent(space, inner))
    else:
        raise UnknownAgent(agent_id)
    agent.name = agent_id
    return agent


def zoo_ids(space: Space) -> list[str]:
    """The stock agent zoo."""
    swap = ",".join(reversed(space.actions))
    ids = [f"constant:{a}" for a in space.actions]
    ids += ["uniform", "cycle", "obs-copy", "greedy", "winstay", "dual:greedy", "dual:winstay",
            "mixture:greedy", f"permute:{swap}:greedy"]
    return ids


def zoo(space: Space) -> list[Agent]:
    return [make_agent(space, i) for i in zoo_ids(space)]
