"""Communication-based shared policy: every agent runs the same encoder,
a stack of communication layers that mix in the mean of the other agents'
hidden states, and a decoder producing action logits.

One parameter vector serves the whole fleet. With communication disabled
the same class degrades to a conventional per-agent network (the no-comm
baseline): the mixed-in vector is forced to zero at every layer, so no
cross-agent path exists.
"""

from __future__ import annotations

import numpy as np

from .nn import Adam, Mlp, softmax


def comm_mean(hiddens, j: int) -> np.ndarray:
    """Mean of the other agents' hidden vectors; zero when there are none."""
    h = np.asarray(hiddens, dtype=float)
    n_agents = h.shape[0]
    if n_agents < 2:
        return np.zeros(h.shape[1])
    return (h.sum(axis=0) - h[j]) / (n_agents - 1)


def _comm_means(h: np.ndarray) -> np.ndarray:
    """Vectorized comm_mean over (B, J, H): all agents' c vectors at once."""
    n_agents = h.shape[1]
    if n_agents < 2:
        return np.zeros_like(h)
    return (h.sum(axis=1, keepdims=True) - h) / (n_agents - 1)


class CommNetPolicy:
    """Shared-parameter joint policy over a fleet of agents.

    comm_layers is the number of communication rounds; 0 means the decoder
    reads the encoder output directly. comm_enabled=False keeps the layer
    stack but zeroes the communication vector everywhere.
    """

    def __init__(self, obs_dim, n_actions, hidden=64, comm_layers=2,
                 comm_enabled=True, rng=None):
        rng = rng if rng is not None else np.random.default_rng()
        self.obs_dim = int(obs_dim)
        self.n_actions = int(n_actions)
        self.hidden = int(hidden)
        self.comm_layers = int(comm_layers)
        self.comm_enabled = bool(comm_enabled)
        # encoder is a plain affine map; each communication module rectifies
        # its output, and the decoder emits raw logits
        self.encoder = Mlp([obs_dim, hidden], rng=rng)
        self.modules = [
            Mlp([2 * hidden, hidden], rng=rng, output_activation="relu")
            for _ in range(self.comm_layers)
        ]
        self.decoder = Mlp([hidden, n_actions], rng=rng)

    @property
    def _components(self):
        return [self.encoder, *self.modules, self.decoder]

    @property
    def n_params(self) -> int:
        return sum(c.n_params for c in self._components)

    def get_params(self) -> np.ndarray:
        return np.concatenate([c.get_params() for c in self._components])

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape}")
        k = 0
        for c in self._components:
            c.set_params(flat[k:k + c.n_params])
            k += c.n_params

    def encode(self, obs: np.ndarray) -> np.ndarray:
        """First-layer hidden state for a single observation vector."""
        h, _ = self.encoder.forward(np.asarray(obs, dtype=float))
        return h

    def forward_joint(self, observations):
        """Action distributions for all agents jointly.

        observations: (J, obs_dim) or a batch (B, J, obs_dim).
        Returns (probs, cache) with probs shaped like the input plus an
        action axis; each row is a valid distribution.
        """
        obs = np.asarray(observations, dtype=float)
        single = obs.ndim == 2
        x = obs[None] if single else obs
        batch, n_agents, _ = x.shape
        flat = x.reshape(batch * n_agents, -1)
        h, enc_cache = self.encoder.forward(flat)
        module_caches = []
        for module in self.modules:
            grouped = h.reshape(batch, n_agents, self.hidden)
            c = _comm_means(grouped) if self.comm_enabled else np.zeros_like(grouped)
            stacked = np.concatenate([grouped, c], axis=-1).reshape(batch * n_agents, 2 * self.hidden)
            h, cache = module.forward(stacked)
            module_caches.append(cache)
        logits, dec_cache = self.decoder.forward(h)
        probs = softmax(logits).reshape(batch, n_agents, self.n_actions)
        cache = (enc_cache, module_caches, dec_cache, (batch, n_agents), single)
        return (probs[0] if single else probs), cache

    def backward_joint(self, cache, logit_grads):
        """Gradient of a scalar objective w.r.t. the shared parameter vector.

        logit_grads: d objective / d logits, shaped like forward_joint's
        probs. Communication averaging routes each agent's gradient into
        every other agent's branch.
        """
        enc_cache, module_caches, dec_cache, (batch, n_agents), single = cache
        dlogits = np.asarray(logit_grads, dtype=float)
        if single:
            dlogits = dlogits[None]
        dec_grad, dh = self.decoder.backward(dec_cache, dlogits.reshape(batch * n_agents, self.n_actions))
        module_grads = []
        for module, mod_cache in zip(reversed(self.modules), reversed(module_caches)):
            grad, dstacked = module.backward(mod_cache, dh)
            module_grads.append(grad)
            dstacked = dstacked.reshape(batch, n_agents, 2 * self.hidden)
            dh_direct = dstacked[:, :, :self.hidden]
            dc = dstacked[:, :, self.hidden:]
            dh_grouped = dh_direct
            if self.comm_enabled and n_agents >= 2:
                dh_grouped = dh_direct + (dc.sum(axis=1, keepdims=True) - dc) / (n_agents - 1)
            dh = dh_grouped.reshape(batch * n_agents, self.hidden)
        module_grads.reverse()
        enc_grad, _ = self.encoder.backward(enc_cache, dh)
        return np.concatenate([enc_grad, *module_grads, dec_grad])

    def make_optimizer(self, alpha: float) -> Adam:
        return Adam(self.n_params, alpha)

    def to_state(self) -> dict:
        return {
            "obs_dim": self.obs_dim,
            "n_actions": self.n_actions,
            "hidden": self.hidden,
            "comm_layers": self.comm_layers,
            "comm_enabled": self.comm_enabled,
            "params": self.get_params().tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "CommNetPolicy":
        policy = cls(
            state["obs_dim"], state["n_actions"], hidden=state["hidden"],
            comm_layers=state["comm_layers"], comm_enabled=state["comm_enabled"],
            rng=np.random.default_rng(0),
        )
        policy.set_params(np.array(state["params"], dtype=float))
        return policy


def select_action(probs, epsilon: float, rng, mode="sample") -> int:
    """Epsilon-mixed action choice from one agent's distribution.

    With probability epsilon the action is uniform over the action set;
    otherwise it is sampled from the distribution (training) or the argmax
    (inference).
    """
    p = np.asarray(probs, dtype=float)
    if mode not in ("sample", "argmax"):
        raise ValueError(f"unknown mode {mode!r}")
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(p.shape[0]))
    if mode == "argmax":
        return int(np.argmax(p))
    return int(rng.choice(p.shape[0], p=p / p.sum()))
