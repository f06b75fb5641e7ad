"""Federated Kalman filtering for RSSI-based device localization.

Modules:
    filter_core   linear KF predict / gain / Joseph-form update
    federation    information sharing and information-space fusion
    rssi_model    log-distance path-loss channel
    localization  least-squares trilateration
    ledger        hash-chained trusted-device ledger
    simnet        lockstep cloud/fog/edge simulator
    metrics       RMSE and RSSI percent accuracy
"""

__version__ = "0.1.0"
