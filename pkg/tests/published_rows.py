"""Published per-KPI tuning outcomes used by the selection-logic tests."""

from rcseq.tuner import TuningRow

PUBLISHED_ROWS = [
    TuningRow("DL_QPSK_Fail_Rate", 3, 0.14, 20),
    TuningRow("DL_16QAM_Success_Rate", 3, 0.02, 40),
    TuningRow("DL_QPSK_Success_Rate", 4, 0.16, 0),
    TuningRow("DL_QPSK_Distribution", 3, 0.00, 30),
    TuningRow("DL_256QAM_Distribution", 3, 0.02, 0),
    TuningRow("DL_16QAM_Fail_Rate", 3, 0.02, 50),
    TuningRow("RAC_UE_REF_Death_Rate", 3, 0.00, 0),
    TuningRow("RRC_Connected_Users_DL", 3, 1.00, 0),
    TuningRow("SINR_DL_PDCCH_AVG", 3, 0.00, 0),
    TuningRow("DL_64QAM_Success_Rate", 3, 0.14, 40),
    TuningRow("DL_64QAM_Distribution", 3, 0.00, 0),
    TuningRow("DL_16QAM_Distribution", 3, 0.02, 0),
    TuningRow("DL_256QAM_Fail_Rate", 5, 0.14, 0),
    TuningRow("DL_64QAM_Fail_Rate", 3, 0.15, 15),
    TuningRow("MAC_DL_BLER", 4, 0.50, 0),
    TuningRow("DL_256QAM_Success_Rate", 4, 0.12, 0),
    TuningRow("CCE_Utilization_AVG", 3, 0.45, 20),
    TuningRow("RLC_DL_BLER", 3, 0.00, 0),
]
