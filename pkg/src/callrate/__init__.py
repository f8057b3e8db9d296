"""Laws of motion of the broker call-money rate.

Mean-reverting AR(1)/AR(2)/Ornstein-Uhlenbeck models of the call rate, the
margin-rate and Kelly-leverage processes they imply, and no-arbitrage
bounds on call-loan risk premia.
"""

__version__ = "0.1.0"
