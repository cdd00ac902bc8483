"""Signal processing layer: I/O, STFT, room simulation, beamforming, interaural cues, metrics"""
