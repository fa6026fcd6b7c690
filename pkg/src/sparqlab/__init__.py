"""Budget-aware human-in-the-loop RL lab.

Trains a soft actor-critic agent on a planar reach-and-grasp task while a
query gate decides, step by step, whether to ask an oracle (scripted expert
or live human) for a corrective action under a hard query budget.
"""

__version__ = "0.1.0"
