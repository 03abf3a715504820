"""Party engines, transports, counters, stores and session drivers."""
