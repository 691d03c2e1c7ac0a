# Utils package for the RIQ index explorer
