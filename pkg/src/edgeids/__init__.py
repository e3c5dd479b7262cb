"""edgeids: a desk-scale lab for carbon-aware DRL intrusion detection.

The package simulates an IoT edge gateway under DDoS attack and trains two
reinforcement-learning mitigation agents on top of it:

* an unsupervised autoencoder + DQN agent that flags traffic by
  reconstruction error, and
* a supervised LSTM + DQN agent pre-trained on labeled traces.

Everything is plain numpy: the neural primitives carry exact manual
backpropagation so gradients can be verified against finite differences,
the tabular Q-learning path can be checked against value iteration, and
the sustainability accounting (energy, memory, carbon) feeds a
multi-objective reward.
"""

__version__ = "0.1.0"

from . import agent, evaluation, features, gateway_env, neural, sustain

__all__ = [
    "agent",
    "evaluation",
    "features",
    "gateway_env",
    "neural",
    "sustain",
    "__version__",
]
