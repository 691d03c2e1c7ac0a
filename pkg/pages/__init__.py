# Pages package for the RIQ index explorer
